"""Agreement metrics comparing an explanation against a reference vector:
feature / rank / sign / signed-rank agreement, rank correlation, and pairwise
rank agreement.

All six consume only the rank and sign structure of the two vectors, so they
are invariant to independent positive rescaling of either side. Denominators
are n (not the intersection size).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (Explanation, QualityReport, importances_of, rank_vector,
                   top_n_features)

REFERENCE_METRIC_NAMES = ("fa", "ra", "sa", "sra", "rc", "pra")


@dataclass
class GroundTruthPair:
    """An explanation, the reference it is judged against, and the top-n cutoff."""

    e: np.ndarray
    e_star: np.ndarray
    n: int

    def __post_init__(self):
        self.e = importances_of(self.e)
        self.e_star = importances_of(self.e_star)
        if self.e.shape != self.e_star.shape:
            raise ValueError("length mismatch between explanation and reference")
        if not (np.all(np.isfinite(self.e)) and np.all(np.isfinite(self.e_star))):
            raise ValueError("importances must be finite")
        self.n = int(self.n)
        if not 0 <= self.n <= self.e.size:
            raise ValueError("n exceeds feature count")


def _common_top(p: GroundTruthPair) -> list[int]:
    top_e = set(top_n_features(p.e, p.n))
    top_s = set(top_n_features(p.e_star, p.n))
    return sorted(top_e & top_s)


def feature_agreement(p: GroundTruthPair) -> float:
    """Fraction of the top-n features shared by both sides; 0 when n = 0."""
    if p.n == 0:
        return 0.0
    return len(_common_top(p)) / p.n


def rank_agreement(p: GroundTruthPair) -> float:
    """Fraction of top-n features shared and sitting at the same rank position."""
    if p.n == 0:
        return 0.0
    r_e, r_s = rank_vector(p.e), rank_vector(p.e_star)
    return sum(1 for f in _common_top(p) if r_e[f] == r_s[f]) / p.n


def sign_agreement(p: GroundTruthPair) -> float:
    """Fraction of top-n features shared with matching importance signs."""
    if p.n == 0:
        return 0.0
    return sum(1 for f in _common_top(p)
               if np.sign(p.e[f]) == np.sign(p.e_star[f])) / p.n


def signed_rank_agreement(p: GroundTruthPair) -> float:
    """Fraction of top-n features shared with matching rank and matching sign."""
    if p.n == 0:
        return 0.0
    r_e, r_s = rank_vector(p.e), rank_vector(p.e_star)
    return sum(1 for f in _common_top(p)
               if r_e[f] == r_s[f] and np.sign(p.e[f]) == np.sign(p.e_star[f])) / p.n


def rank_correlation(p: GroundTruthPair) -> float | None:
    """Spearman correlation of the fractional rank vectors over all features.

    Returns None (the undefined marker) when either rank vector is constant.
    """
    r_e, r_s = rank_vector(p.e), rank_vector(p.e_star)
    if np.ptp(r_e) == 0.0 or np.ptp(r_s) == 0.0:
        return None
    ce = r_e - r_e.mean()
    cs = r_s - r_s.mean()
    return float((ce @ cs) / np.sqrt((ce @ ce) * (cs @ cs)))


def pairwise_rank_agreement(p: GroundTruthPair) -> float:
    """Fraction of feature pairs ordered identically by |e| and |e*|.

    A tie counts as agreeing only with a tie.
    """
    n = p.e.size
    if n < 2:
        raise ValueError("pairwise rank agreement needs at least two features")
    a, b = np.abs(p.e), np.abs(p.e_star)
    iu = np.triu_indices(n, k=1)
    signs_a = np.sign(a[:, None] - a[None, :])[iu]
    signs_b = np.sign(b[:, None] - b[None, :])[iu]
    return float((signs_a == signs_b).mean())


REFERENCE_METRICS = {
    "fa": feature_agreement,
    "ra": rank_agreement,
    "sa": sign_agreement,
    "sra": signed_rank_agreement,
    "rc": rank_correlation,
    "pra": pairwise_rank_agreement,
}


def reference_quality_report(metric_name: str, explanations: list[Explanation],
                             e_star, n: int, dataset_id: str = "dataset",
                             model_descriptor: str = "model") -> QualityReport:
    """Score every explanation against one shared reference vector.

    Rank-correlation rows with the undefined marker become NaN per-point
    entries; the aggregate averages the defined rows only.
    """
    if metric_name not in REFERENCE_METRICS:
        raise ValueError(f"unknown reference metric {metric_name!r}")
    fn = REFERENCE_METRICS[metric_name]
    e_star = importances_of(e_star)
    per_point = []
    for e in explanations:
        q = fn(GroundTruthPair(e=e, e_star=e_star, n=n))
        per_point.append(float("nan") if q is None else float(q))
    tags = {e.explainer_tag for e in explanations}
    report = QualityReport.build(
        metric_name=metric_name,
        hyperparams={"n": n},
        per_point_q=per_point,
        dataset_id=dataset_id,
        model_descriptor=model_descriptor,
        explainer_tag=tags.pop() if len(tags) == 1 else "mixed")
    if report.undefined_count:
        report.hyperparams["undefined_count"] = report.undefined_count
    return report
