"""Feature-importance explainers: gradients, integrated gradients, a sampled local
surrogate, kernel-weighted Shapley values, and manual one-hot constructions.

All sampled explainers draw from ``numpy.random.default_rng`` seeded through the
config, so a fixed seed fully determines the output. Explanations target
``predict_proba`` (the smooth surface), not the binarized label.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from .core import Dataset, Explanation, Predictor, ordered_parallel_map, row_seed


@dataclass
class ExplainerConfig:
    """Hyperparameters shared by the explainer family; seed fixes all randomness."""

    kind: str = "gradient"
    samples: int = 1000
    sigma_perturb: float = 0.5
    kernel_width: float | None = None  # default 0.75 * sqrt(N), resolved per call
    baseline: np.ndarray | None = None
    ig_steps: int = 64
    seed: int = 0
    background_size: int = 100
    ridge: float = 1.0

    KINDS = ("gradient", "integrated-gradients", "local-surrogate", "kernel-shapley", "manual")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown explainer kind {self.kind!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.ig_steps < 1:
            raise ValueError("ig_steps must be >= 1")

    def with_seed(self, seed: int) -> "ExplainerConfig":
        return ExplainerConfig(kind=self.kind, samples=self.samples,
                               sigma_perturb=self.sigma_perturb, kernel_width=self.kernel_width,
                               baseline=self.baseline, ig_steps=self.ig_steps, seed=seed,
                               background_size=self.background_size, ridge=self.ridge)


def explain_gradient(m: Predictor, x, datapoint_index: int = 0) -> Explanation:
    """e = gradient of predict_proba at x."""
    g = m.gradient(np.asarray(x, dtype=float))
    if g is None:
        raise ValueError("gradient not supported")
    return Explanation(importances=g, datapoint_index=datapoint_index, explainer_tag="gradient")


def explain_integrated_gradients(m: Predictor, x, cfg: ExplainerConfig,
                                 datapoint_index: int = 0) -> Explanation:
    """Midpoint-rule path integral of the gradient from a baseline to x."""
    x = np.asarray(x, dtype=float)
    baseline = np.zeros_like(x) if cfg.baseline is None else np.asarray(cfg.baseline, dtype=float)
    if baseline.shape != x.shape:
        raise ValueError("baseline length must match the datapoint")
    if m.gradient(x) is None:
        raise ValueError("gradient not supported")
    ts = (np.arange(cfg.ig_steps) + 0.5) / cfg.ig_steps
    grads = np.zeros_like(x)
    for t in ts:
        grads += m.gradient(baseline + t * (x - baseline))
    e = (x - baseline) * grads / cfg.ig_steps
    return Explanation(importances=e, datapoint_index=datapoint_index,
                       explainer_tag="integrated-gradients")


def _weighted_ridge(Z, y, w, alpha):
    """Weighted least squares with an intercept; the ridge penalty spares the intercept."""
    A = np.column_stack([np.ones(Z.shape[0]), Z])
    WA = A * w[:, None]
    reg = np.eye(A.shape[1]) * alpha
    reg[0, 0] = 0.0
    theta = np.linalg.solve(A.T @ WA + reg, WA.T @ y)
    return theta[1:]


def explain_local_surrogate(m: Predictor, x, d: Dataset, cfg: ExplainerConfig,
                            datapoint_index: int = 0) -> Explanation:
    """Slopes of a kernel-weighted ridge fit over Gaussian perturbations around x."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if cfg.samples < n + 2:
        raise ValueError("samples must be at least n_features + 2")
    rng = np.random.default_rng(cfg.seed)
    Z = x + rng.normal(0.0, cfg.sigma_perturb, (cfg.samples, n))
    y = m.predict_proba_batch(Z)
    width = cfg.kernel_width if cfg.kernel_width is not None else 0.75 * np.sqrt(n)
    w = np.exp(-np.sum((Z - x) ** 2, axis=1) / width**2)

    alpha = cfg.ridge
    tag = "local-surrogate"
    for _ in range(8):
        try:
            slopes = _weighted_ridge(Z, y, w, alpha)
        except np.linalg.LinAlgError:
            slopes = None
        if slopes is not None and np.all(np.isfinite(slopes)):
            break
        alpha *= 10.0  # ridge floor escalation instead of failing
    else:
        raise RuntimeError("surrogate regression did not stabilize")
    if alpha != cfg.ridge:
        tag = "local-surrogate[ridge-floor]"
    if np.max(np.abs(Z - x)) < 1e-8:
        tag = "local-surrogate[degenerate-sampling]"  # no local variation to fit
    return Explanation(importances=slopes, datapoint_index=datapoint_index, explainer_tag=tag)


def _kernel_weight(n: int, s: int) -> float:
    return (n - 1) / (comb(n, s) * s * (n - s))


def _coalition_masks(n: int, budget: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Masks (rows of 0/1) and their regression weights.

    Enumerates every non-trivial coalition when the budget allows; otherwise
    samples coalition sizes proportionally to the Shapley kernel (which makes
    the subsequent least squares unweighted).
    """
    total = 2**n - 2
    if total <= budget:
        masks = np.zeros((total, n))
        weights = np.empty(total)
        for i, bits in enumerate(range(1, 2**n - 1)):
            mask = [(bits >> j) & 1 for j in range(n)]
            masks[i] = mask
            weights[i] = _kernel_weight(n, int(sum(mask)))
        return masks, weights
    sizes = np.arange(1, n)
    p = (n - 1) / (sizes * (n - sizes))  # kernel weight summed over coalitions of each size
    p = p / p.sum()
    masks = np.zeros((budget, n))
    drawn = rng.choice(sizes, size=budget, p=p)
    for i, s in enumerate(drawn):
        masks[i, rng.permutation(n)[:s]] = 1.0
    return masks, np.ones(budget)


def explain_kernel_shapley(m: Predictor, x, d: Dataset, cfg: ExplainerConfig,
                           datapoint_index: int = 0) -> Explanation:
    """Shapley values via the kernel-weighted least squares with the efficiency constraint.

    Masked features are replaced by values from seeded background rows of the
    dataset; coalition values average over that background.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if cfg.samples < 2 * n:
        raise ValueError("samples must be at least 2 * n_features")
    rng = np.random.default_rng(cfg.seed)
    bg_count = min(cfg.background_size, d.nu)
    background = d.features[rng.choice(d.nu, size=bg_count, replace=False)]

    v_empty = float(m.predict_proba_batch(background).mean())
    v_full = m.predict_proba(x)
    delta = v_full - v_empty

    masks, weights = _coalition_masks(n, cfg.samples, rng)
    n_masks = masks.shape[0]
    # composite[c, b, j] = x_j when feature j is in coalition c, else background row b
    composite = np.repeat(background[None, :, :], n_masks, axis=0)
    keep = masks.astype(bool)
    for j in range(n):
        composite[keep[:, j], :, j] = x[j]
    values = m.predict_proba_batch(composite.reshape(-1, n)).reshape(n_masks, bg_count).mean(axis=1)

    # substitute the efficiency constraint: phi_n = delta - sum(phi_1..phi_{n-1})
    z_last = masks[:, -1]
    design = masks[:, :-1] - z_last[:, None]
    target = values - v_empty - z_last * delta
    sw = np.sqrt(weights)
    phi_head, *_ = np.linalg.lstsq(design * sw[:, None], target * sw, rcond=None)
    phi = np.append(phi_head, delta - phi_head.sum())
    return Explanation(importances=phi, datapoint_index=datapoint_index,
                       explainer_tag="kernel-shapley")


def make_manual_explanations(d: Dataset, important_index: int) -> list[Explanation]:
    """One explanation per row marking a single feature as solely important."""
    if not 0 <= important_index < d.n_features:
        raise ValueError("important_index out of range")
    template = np.zeros(d.n_features)
    template[important_index] = 1.0
    tag = f"manual[{d.feature_names[important_index]}]"
    return [Explanation(importances=template, datapoint_index=i, explainer_tag=tag)
            for i in range(d.nu)]


def explain_dataset(m: Predictor, d: Dataset, cfg: ExplainerConfig,
                    jobs: int = 1) -> list[Explanation]:
    """Explain every row; per-row seeds derive from cfg.seed so output is
    independent of scheduling."""
    def one(i: int) -> Explanation:
        x = d.features[i]
        if cfg.kind == "gradient":
            return explain_gradient(m, x, datapoint_index=i)
        local = cfg.with_seed(row_seed(cfg.seed, i))
        if cfg.kind == "integrated-gradients":
            return explain_integrated_gradients(m, x, local, datapoint_index=i)
        if cfg.kind == "local-surrogate":
            return explain_local_surrogate(m, x, d, local, datapoint_index=i)
        if cfg.kind == "kernel-shapley":
            return explain_kernel_shapley(m, x, d, local, datapoint_index=i)
        raise ValueError(f"explainer kind {cfg.kind!r} cannot run over a dataset")

    return ordered_parallel_map(one, range(d.nu), jobs=jobs)


def save_explanations_csv(explanations: list[Explanation], path, feature_names=None) -> None:
    """Row index plus one importance column per feature."""
    if not explanations:
        raise ValueError("no explanations to save")
    n = len(explanations[0])
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(n)]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["datapoint_index"] + names)
        for e in explanations:
            writer.writerow([e.datapoint_index] + [repr(float(v)) for v in e.importances])


def load_explanations_csv(path, explainer_tag: str = "loaded") -> list[Explanation]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    out = []
    for row in rows[1:]:
        out.append(Explanation(importances=[float(v) for v in row[1:]],
                               datapoint_index=int(row[0]), explainer_tag=explainer_tag))
    return out


def save_explanations_json(explanations: list[Explanation], path) -> None:
    payload = [{"datapoint_index": e.datapoint_index, "explainer_tag": e.explainer_tag,
                "importances": [float(v) for v in e.importances]} for e in explanations]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_explanations_json(path) -> list[Explanation]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return [Explanation(importances=item["importances"],
                        datapoint_index=item["datapoint_index"],
                        explainer_tag=item.get("explainer_tag", "loaded"))
            for item in payload]
