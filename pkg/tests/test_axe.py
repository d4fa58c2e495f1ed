import numpy as np
import pytest

from axebench.axe import (AxeConfig, NeighborModel, axe_quality,
                          axe_quality_single, knn_predict,
                          one_hot_axe_aggregates)
from axebench.core import Dataset, Explanation
from axebench.explainers import make_manual_explanations

from oracles import axe_oracle, knn_oracle


def noise_explanations(d, feature):
    return make_manual_explanations(d, feature)


class TestKnnPredict:
    def test_self_match_with_inclusion(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 2))
        targets = rng.integers(0, 2, 30)
        nm = NeighborModel(feature_subset=(0, 1), train_features=X, targets=targets)
        for i in (0, 13, 29):
            assert knn_predict(nm, X[i], k=1, include_self=True) == targets[i]

    def test_loo_separated_clusters(self):
        # two well-separated 1-D clusters: leave-one-out 3-NN recovers the label
        rng = np.random.default_rng(1)
        left = rng.normal(-5, 0.4, 20)
        right = rng.normal(5, 0.4, 20)
        col = np.concatenate([left, right])
        targets = np.array([0] * 20 + [1] * 20)
        X = np.column_stack([col, rng.normal(size=40)])
        nm = NeighborModel(feature_subset=(0,), train_features=X[:, :1], targets=targets)
        for i in range(40):
            got = knn_predict(nm, X[i], k=3, include_self=False, self_index=i)
            want = knn_oracle(X, targets, [0], X[i], 3, False, i)
            assert got == want == targets[i]

    def test_noise_feature_near_chance(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(400, 2))
        targets = (X[:, 0] > 0).astype(int)
        nm = NeighborModel(feature_subset=(1,), train_features=X[:, 1:], targets=targets)
        hits = [knn_predict(nm, X[i], k=5, include_self=False, self_index=i) == targets[i]
                for i in range(400)]
        assert abs(np.mean(hits) - 0.5) <= 0.08

    def test_distance_ties_break_by_row_index(self):
        X = np.array([[1.0], [1.0], [1.0], [2.0]])
        targets = np.array([1, 0, 0, 1])
        nm = NeighborModel(feature_subset=(0,), train_features=X, targets=targets)
        # query at 1.0: rows 0,1,2 all tie at distance 0; k=1 picks row 0
        assert knn_predict(nm, [1.0], k=1, include_self=True) == 1

    def test_even_split_votes_zero(self):
        X = np.array([[0.0], [0.1], [0.2], [0.3]])
        targets = np.array([1, 0, 1, 0])
        nm = NeighborModel(feature_subset=(0,), train_features=X, targets=targets)
        assert knn_predict(nm, [0.05], k=2, include_self=True) == 0
        assert knn_predict(nm, [0.05], k=4, include_self=True) == 0

    def test_k_exceeds_candidates(self):
        nm = NeighborModel(feature_subset=(0,), train_features=np.zeros((3, 1)),
                           targets=np.zeros(3, dtype=int))
        with pytest.raises(ValueError, match="candidate count"):
            knn_predict(nm, [0.0], k=3, include_self=False, self_index=1)


class TestAxeQuality:
    def test_generative_feature_scores_high(self, threshold_data):
        d = threshold_data
        y = d.labels
        report = axe_quality(d, y, make_manual_explanations(d, 0), AxeConfig(n=1, k=5))
        assert report.aggregate_q >= 0.98
        assert report.hyperparams == {"n": 1, "k": 5, "include_self": False}

    def test_noise_feature_scores_near_chance(self, threshold_data):
        d = threshold_data
        report = axe_quality(d, d.labels, make_manual_explanations(d, 3), AxeConfig(n=1, k=5))
        assert abs(report.aggregate_q - 0.5) <= 0.08

    def test_single_row_consistency(self, small_threshold_data):
        d = small_threshold_data
        expls = make_manual_explanations(d, 0)
        cfg = AxeConfig(n=1, k=3)
        report = axe_quality(d, d.labels, expls, cfg)
        for i in (0, 17, 79):
            assert axe_quality_single(d, d.labels, expls[i], i, cfg) == report.per_point_q[i]
        assert report.aggregate_q == pytest.approx(report.per_point_q.mean())

    def test_scale_invariance(self, small_threshold_data):
        d = small_threshold_data
        raw = np.array([0.4, -0.2, 0.9, 0.1])
        a = [Explanation(raw, i) for i in range(d.nu)]
        b = [Explanation(137.0 * raw, i) for i in range(d.nu)]
        cfg = AxeConfig(n=2, k=3)
        ra = axe_quality(d, d.labels, a, cfg)
        rb = axe_quality(d, d.labels, b, cfg)
        assert np.array_equal(ra.per_point_q, rb.per_point_q)

    def test_permutation_equivariance(self, small_threshold_data):
        d = small_threshold_data
        expls = make_manual_explanations(d, 1)
        cfg = AxeConfig(n=1, k=3)
        base = axe_quality(d, d.labels, expls, cfg)
        perm = np.random.default_rng(3).permutation(d.nu)
        shuffled = Dataset(features=d.features[perm], feature_names=d.feature_names,
                           labels=d.labels[perm], dataset_id="shuffled")
        expls_p = [Explanation(expls[j].importances, i) for i, j in enumerate(perm)]
        permuted = axe_quality(shuffled, d.labels[perm], expls_p, cfg)
        assert np.array_equal(permuted.per_point_q, base.per_point_q[perm])
        assert permuted.aggregate_q == base.aggregate_q

    def test_depends_on_predictions(self, small_threshold_data):
        # changing a single prediction entry moves the report
        d = small_threshold_data
        expls = make_manual_explanations(d, 0)
        cfg = AxeConfig(n=1, k=3)
        on_preds = axe_quality(d, d.labels, expls, cfg)
        tweaked = d.labels.copy()
        tweaked[5] = 1 - tweaked[5]
        on_tweaked = axe_quality(d, tweaked, expls, cfg)
        assert not np.array_equal(on_preds.per_point_q, on_tweaked.per_point_q)

    def test_validation_errors(self, small_threshold_data):
        d = small_threshold_data
        expls = make_manual_explanations(d, 0)
        with pytest.raises(ValueError, match="length mismatch"):
            axe_quality(d, d.labels, expls[:-1], AxeConfig(n=1, k=3))
        with pytest.raises(ValueError, match="length mismatch"):
            axe_quality(d, d.labels[:-1], expls, AxeConfig(n=1, k=3))
        with pytest.raises(ValueError, match="n out of range"):
            axe_quality(d, d.labels, expls, AxeConfig(n=9, k=3))
        with pytest.raises(ValueError, match="k out of range"):
            axe_quality(d, d.labels, expls, AxeConfig(n=1, k=d.nu))
        with pytest.raises(ValueError):
            AxeConfig(n=0, k=3)

    def test_trace_file(self, small_threshold_data, tmp_path):
        d = small_threshold_data
        path = tmp_path / "trace.csv"
        axe_quality(d, d.labels, make_manual_explanations(d, 0), AxeConfig(n=1, k=3),
                    trace_path=path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "row,chosen_features,recovered,target,q"
        assert len(lines) == d.nu + 1


class TestSelfInclusionModes:
    def test_include_self_k1_degenerate_loo_not(self, threshold_data):
        d = threshold_data  # continuous gaussian features: duplicate-free
        noise = make_manual_explanations(d, 3)
        literal = axe_quality(d, d.labels, noise, AxeConfig(n=1, k=1, include_self=True))
        assert literal.aggregate_q == 1.0
        loo = axe_quality(d, d.labels, noise, AxeConfig(n=1, k=1, include_self=False))
        assert loo.aggregate_q < 1.0

    def test_mode_stamped_in_report(self, small_threshold_data):
        d = small_threshold_data
        r = axe_quality(d, d.labels, make_manual_explanations(d, 0),
                        AxeConfig(n=1, k=1, include_self=True))
        assert r.hyperparams["include_self"] is True


class TestOffManifoldIndifference:
    def test_identical_predictions_identical_reports(self, small_threshold_data):
        """Only (features, predictions, explanations) enter the score; models
        that agree on every row are indistinguishable to it."""
        d = small_threshold_data
        y = d.labels
        expls = make_manual_explanations(d, 0)
        cfg = AxeConfig(n=1, k=5)
        a = axe_quality(d, y, expls, cfg, model_descriptor="one")
        b = axe_quality(d, y.copy(), expls, cfg, model_descriptor="two")
        assert np.array_equal(a.per_point_q, b.per_point_q)
        assert a.aggregate_q == b.aggregate_q


class TestFastPathAndOracle:
    def test_one_hot_fast_path_matches_general_path(self, small_threshold_data):
        d = small_threshold_data
        y = d.labels
        cache = {}
        for feature in range(d.n_features):
            for include_self in (False, True):
                fast = one_hot_axe_aggregates(d, feature, y, [1, 3, 5],
                                              include_self, _table_cache=cache)
                for k, agg in fast.items():
                    slow = axe_quality(d, y, make_manual_explanations(d, feature),
                                       AxeConfig(n=1, k=k, include_self=include_self))
                    assert agg == slow.aggregate_q

    def test_matches_exhaustive_oracle_small_instances(self):
        rng = np.random.default_rng(4)
        for trial in range(40):
            nu = int(rng.integers(6, 31))
            nf = int(rng.integers(2, 5))
            features = np.round(rng.normal(size=(nu, nf)), 1)  # rounding forces ties
            y = rng.integers(0, 2, nu)
            importance_rows = np.round(rng.normal(size=(nu, nf)), 1)
            n = int(rng.integers(1, nf + 1))
            k = int(rng.integers(1, nu - 1))
            include_self = bool(rng.integers(0, 2))
            d = Dataset(features=features,
                        feature_names=tuple(f"f{j}" for j in range(nf)))
            expls = [Explanation(importance_rows[i], i) for i in range(nu)]
            report = axe_quality(d, y, expls, AxeConfig(n=n, k=k, include_self=include_self))
            oracle_pp, oracle_agg = axe_oracle(features, y, importance_rows, n, k, include_self)
            assert report.per_point_q.tolist() == oracle_pp
            assert report.aggregate_q == oracle_agg
