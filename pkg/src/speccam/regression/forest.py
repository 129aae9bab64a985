"""Bagged regression trees.

Trees are stored as flat node arrays (feature, threshold, left, right,
value); a leaf has ``feature == -1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import BadHyperparameter


@dataclass(frozen=True)
class RfParams:
    n_trees: int = 100
    min_leaf: int = 5
    max_features: int | None = None  # None -> ceil(d / 3)
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1 or self.min_leaf < 1:
            raise BadHyperparameter("n_trees and min_leaf must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise BadHyperparameter("max_features must be >= 1")


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, xs: np.ndarray) -> np.ndarray:
        node = np.zeros(len(xs), dtype=np.int64)
        rows = np.arange(len(xs))
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            r, nd = rows[inner], node[inner]
            go_left = xs[r, feat[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64),
        )


def _best_split(x: np.ndarray, y: np.ndarray, feats: np.ndarray, min_leaf: int):
    """Lowest summed child SSE over all cut points of the candidate features.

    Returns (sse, feature, threshold) or None when no admissible cut exists.
    """
    n = len(y)
    xs = x[:, feats]
    order = np.argsort(xs, axis=0, kind="stable")
    xs_sorted = np.take_along_axis(xs, order, axis=0)
    yc = y - y.mean()
    ys = yc[order]
    csum = np.cumsum(ys, axis=0)
    csq = np.cumsum(ys * ys, axis=0)
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    s_left, q_left = csum[:-1], csq[:-1]
    s_right, q_right = csum[-1] - s_left, csq[-1] - q_left
    sse = (q_left - s_left**2 / n_left) + (q_right - s_right**2 / n_right)
    ok = xs_sorted[:-1] < xs_sorted[1:]
    ok &= (n_left >= min_leaf) & (n_right >= min_leaf)
    if not ok.any():
        return None
    sse = np.where(ok, sse, np.inf)
    flat = int(np.argmin(sse))
    pos, col = divmod(flat, len(feats))
    lo, hi = xs_sorted[pos, col], xs_sorted[pos + 1, col]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return float(sse[pos, col]), int(feats[col]), float(thr)


def grow_tree(x: np.ndarray, y: np.ndarray, min_leaf: int, max_features: int, rng) -> Tree:
    d = x.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(v):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(v)
        return len(value) - 1

    root = new_node(float(y.mean()))
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        if len(idx) < 2 * min_leaf or np.all(yn == yn[0]):
            continue
        if max_features < d:
            feats = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            feats = np.arange(d)
        found = _best_split(x[idx], yn, feats, min_leaf)
        if found is None:
            continue
        sse, feat, thr = found
        parent_sse = float(((yn - yn.mean()) ** 2).sum())
        if not sse < parent_sse:
            continue
        mask = x[idx, feat] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = feat, thr
        left[node] = new_node(float(y[li].mean()))
        right[node] = new_node(float(y[ri].mean()))
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )


@dataclass(frozen=True, eq=False)
class ForestState:
    trees: tuple

    def predict(self, xs: np.ndarray) -> np.ndarray:
        return np.mean([t.predict(xs) for t in self.trees], axis=0)


def fit_forest(xs: np.ndarray, y: np.ndarray, params: RfParams, rng) -> ForestState:
    n, d = xs.shape
    m = params.max_features if params.max_features is not None else math.ceil(d / 3)
    m = min(m, d)
    trees = []
    for _ in range(params.n_trees):
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
            trees.append(grow_tree(xs[rows], y[rows], params.min_leaf, m, rng))
        else:
            trees.append(grow_tree(xs, y, params.min_leaf, m, rng))
    return ForestState(tuple(trees))
