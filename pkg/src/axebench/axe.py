"""Ground-truth-agnostic explanation quality: per-datapoint k-NN recovery of
model predictions from the explanation's top-n features.

Each datapoint gets its own neighbor model built on the feature subset its
explanation marks as most important; a shared global surrogate would defeat
the purpose. Neighbor targets are the model's predictions on the dataset, not
the data labels, and evaluation never leaves the dataset rows.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dataset, Explanation, QualityReport, top_n_features


@dataclass(frozen=True)
class AxeConfig:
    """Hyperparameters: top-n cutoff, neighbor count, and self-inclusion mode.

    include_self=False (leave-one-out) is the default: with the query row in
    its own candidate pool, k=1 is degenerately perfect for any explanation.
    The literal mode remains available and is stamped into every report.
    """

    n: int = 1
    k: int = 5
    include_self: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n out of range: need n >= 1")
        if self.k < 1:
            raise ValueError("k out of range: need k >= 1")


@dataclass
class NeighborModel:
    """k-NN training state restricted to one feature subset."""

    feature_subset: tuple[int, ...]
    train_features: np.ndarray  # (nu, len(feature_subset))
    targets: np.ndarray

    def __post_init__(self):
        subset = tuple(int(i) for i in self.feature_subset)
        if len(set(subset)) != len(subset):
            raise ValueError("feature subset indices must be distinct")
        self.feature_subset = subset
        self.train_features = np.asarray(self.train_features, dtype=float)
        self.targets = np.asarray(self.targets, dtype=int)
        if self.train_features.shape != (self.targets.size, len(subset)):
            raise ValueError("neighbor model shapes are inconsistent")


def make_neighbor_model(d: Dataset, y_preds, e, n: int) -> NeighborModel:
    subset = tuple(top_n_features(e, n))
    return NeighborModel(feature_subset=subset,
                         train_features=d.features[:, list(subset)],
                         targets=y_preds)


def knn_predict(nm: NeighborModel, x, k: int, include_self: bool = False,
                self_index: int | None = None) -> int:
    """Majority vote of the k nearest rows under Euclidean distance on the subset.

    Distance ties break by ascending row index; an even split votes 0. With
    include_self=False and a self_index, that row is removed from the pool.
    """
    q = np.asarray(x, dtype=float)[list(nm.feature_subset)]
    d2 = ((nm.train_features - q) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")
    if not include_self and self_index is not None:
        order = order[order != self_index]
    if k > order.size:
        raise ValueError("k exceeds candidate count")
    votes = int(nm.targets[order[:k]].sum())
    return int(votes * 2 > k)


def _validate_inputs(d: Dataset, y_preds, cfg: AxeConfig) -> np.ndarray:
    y = np.asarray(y_preds, dtype=int)
    if y.shape != (d.nu,):
        raise ValueError("length mismatch: predictions must cover every dataset row")
    if y.size and not np.isin(y, (0, 1)).all():
        raise ValueError("predictions must be 0/1")
    if cfg.n > d.n_features:
        raise ValueError("n out of range: exceeds feature count")
    candidates = d.nu if cfg.include_self else d.nu - 1
    if cfg.k > candidates:
        raise ValueError("k out of range: exceeds candidate count")
    return y


def axe_quality_single(d: Dataset, y_preds, e: Explanation, i: int, cfg: AxeConfig) -> int:
    """Per-row quality bit: does the row's own neighbor model recover its prediction."""
    y = _validate_inputs(d, y_preds, cfg)
    if not 0 <= i < d.nu:
        raise ValueError("row index out of range")
    nm = make_neighbor_model(d, y, e, cfg.n)
    predicted = knn_predict(nm, d.features[i], cfg.k,
                            include_self=cfg.include_self, self_index=i)
    return int(predicted == y[i])


def axe_quality(d: Dataset, y_preds, explanations: list[Explanation], cfg: AxeConfig,
                model_descriptor: str = "model", trace_path=None) -> QualityReport:
    """Score one explanation set: accuracy of per-row top-n k-NN prediction recovery."""
    y = _validate_inputs(d, y_preds, cfg)
    if len(explanations) != d.nu:
        raise ValueError("length mismatch: one explanation per dataset row required")
    per_point = np.empty(d.nu)
    recovered = np.empty(d.nu, dtype=int)
    subsets = []
    for i, e in enumerate(explanations):
        nm = make_neighbor_model(d, y, e, cfg.n)
        subsets.append(nm.feature_subset)
        recovered[i] = knn_predict(nm, d.features[i], cfg.k,
                                   include_self=cfg.include_self, self_index=i)
        per_point[i] = float(recovered[i] == y[i])

    if trace_path is not None:
        _write_trace(trace_path, subsets, recovered, y, per_point)

    tags = {e.explainer_tag for e in explanations}
    return QualityReport.build(
        metric_name="axe",
        hyperparams={"n": cfg.n, "k": cfg.k, "include_self": cfg.include_self},
        per_point_q=per_point,
        dataset_id=d.dataset_id,
        model_descriptor=model_descriptor,
        explainer_tag=tags.pop() if len(tags) == 1 else "mixed")


def one_hot_axe_aggregates(d: Dataset, feature: int, y_preds, ks, include_self: bool = False,
                           _table_cache: dict | None = None) -> dict[int, float]:
    """Aggregates for a one-hot explanation set over several k values at once.

    Semantically identical to running :func:`axe_quality` with the one-hot set
    per k; the neighbor order for a single-feature subset does not depend on k
    or on the targets, so it is computed once (and optionally cached across
    models scoring the same dataset).
    """
    y = np.asarray(y_preds, dtype=int)
    ks = sorted(set(int(k) for k in ks))
    max_k = ks[-1]
    candidates = d.nu if include_self else d.nu - 1
    if max_k > candidates or min(ks) < 1:
        raise ValueError("k out of range: exceeds candidate count")

    key = (feature, include_self, max_k)
    table = _table_cache.get(key) if _table_cache is not None else None
    if table is None:
        col = d.features[:, feature]
        table = np.empty((d.nu, max_k), dtype=int)
        for i in range(d.nu):
            order = np.argsort((col - col[i]) ** 2, kind="stable")
            if include_self:
                table[i] = order[:max_k]
            else:
                head = order[:max_k + 1]
                table[i] = head[head != i][:max_k]
        if _table_cache is not None:
            _table_cache[key] = table
    out = {}
    for k in ks:
        votes = y[table[:, :k]].sum(axis=1)
        recovered = (votes * 2 > k).astype(int)
        out[k] = float((recovered == y).mean())
    return out


def _write_trace(path, subsets, recovered, y, per_point) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "chosen_features", "recovered", "target", "q"])
        for i in range(len(per_point)):
            writer.writerow([i, " ".join(map(str, subsets[i])),
                             int(recovered[i]), int(y[i]), int(per_point[i])])
