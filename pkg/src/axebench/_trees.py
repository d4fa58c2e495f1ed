"""Small bagged CART ensemble backing the in-distribution detector.

Axis-aligned gini splits, deterministic per seed, JSON-serializable. Built for
desk-scale tabular data, not as a general-purpose forest.
"""
from __future__ import annotations

import numpy as np


def _best_split(X, y, feature_ids):
    """Exhaustive gini scan over candidate features; returns (score, feature, threshold)."""
    n = y.size
    total_pos = float(y.sum())
    best = None
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        v = X[order, f]
        distinct = v[1:] != v[:-1]
        if not distinct.any():
            continue
        pos_left = np.cumsum(y[order])[:-1].astype(float)
        n_left = np.arange(1, n, dtype=float)
        n_right = n - n_left
        pos_right = total_pos - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        gini = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
        gini[~distinct] = np.inf
        i = int(np.argmin(gini))
        if best is None or gini[i] < best[0]:
            best = (float(gini[i]), int(f), float((v[i] + v[i + 1]) / 2.0))
    return best


class _Tree:
    """Flat-array decision tree: feature < 0 marks a leaf, value holds P(class 1)."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    @classmethod
    def grow(cls, X, y, rng, max_depth, min_leaf, max_features) -> "_Tree":
        feature, threshold, left, right, value = [], [], [], [], []

        def add_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        def build(idx, depth):
            node = add_node()
            sub_y = y[idx]
            value[node] = float(sub_y.mean())
            if depth >= max_depth or idx.size < 2 * min_leaf or sub_y.min() == sub_y.max():
                return node
            cand = rng.permutation(X.shape[1])[:max_features]
            split = _best_split(X[idx], sub_y, cand)
            if split is None:
                return node
            _, f, t = split
            mask = X[idx, f] <= t
            if mask.sum() < min_leaf or (~mask).sum() < min_leaf:
                return node
            feature[node] = f
            threshold[node] = t
            left[node] = build(idx[mask], depth + 1)
            right[node] = build(idx[~mask], depth + 1)
            return node

        build(np.arange(X.shape[0]), 0)
        return cls(feature, threshold, left, right, value)

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        cur = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[cur]
            active = feat >= 0
            if not active.any():
                break
            r = rows[active]
            go_left = X[r, feat[active]] <= self.threshold[cur[active]]
            cur[r] = np.where(go_left, self.left[cur[active]], self.right[cur[active]])
        return self.value[cur]

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "_Tree":
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


class BaggedTrees:
    """Bootstrap-aggregated CART classifier with per-node feature subsampling."""

    def __init__(self, n_trees: int = 12, max_depth: int = 10, min_leaf: int = 2,
                 feature_fraction: float = 0.7, seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature_fraction = feature_fraction
        self.seed = seed
        self.trees: list[_Tree] = []

    def fit(self, X, y) -> "BaggedTrees":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        rng = np.random.default_rng(self.seed)
        max_features = max(1, int(round(self.feature_fraction * X.shape[1])))
        self.trees = []
        for _ in range(self.n_trees):
            tree_rng = np.random.default_rng(rng.integers(0, 2**31))
            boot = tree_rng.integers(0, X.shape[0], X.shape[0])
            self.trees.append(_Tree.grow(X[boot], y[boot], tree_rng,
                                         self.max_depth, self.min_leaf, max_features))
        return self

    def predict_proba(self, X) -> np.ndarray:
        if not self.trees:
            raise RuntimeError("classifier is not fitted")
        votes = np.zeros(np.asarray(X).shape[0])
        for tree in self.trees:
            votes += tree.predict_proba(X)
        return votes / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(int)

    def to_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_depth": self.max_depth,
                "min_leaf": self.min_leaf, "feature_fraction": self.feature_fraction,
                "seed": self.seed, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "BaggedTrees":
        model = cls(n_trees=d["n_trees"], max_depth=d["max_depth"], min_leaf=d["min_leaf"],
                    feature_fraction=d["feature_fraction"], seed=d["seed"])
        model.trees = [_Tree.from_dict(t) for t in d["trees"]]
        return model
