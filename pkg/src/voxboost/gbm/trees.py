"""Exact-greedy regression tree construction with penalized leaves.

Each leaf value minimizes

    0.5 * sum_{i in leaf} (g_i - w)^2  +  0.5 * lam * w^2  +  alpha * |w|

whose closed form is ``soft_threshold(sum g_i, alpha) / (n_leaf + lam)``.
Split search scans every feature and every midpoint between consecutive
distinct sorted values, maximizing the reduction of the penalized leaf
objective (parent minus children, each at its optimal value).  Gains tie
towards the lower feature index, then the lower threshold.

A branch stops at max depth, below two samples, on a pure node, or when
no candidate yields strictly positive gain.  Leaf sums use ``math.fsum``
(exactly rounded), so leaf values do not depend on row order.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidInputError
from . import _kernels
from .types import RegressionTree, validate_xy


def soft_threshold(s: float, alpha: float) -> float:
    """sign(s) * max(|s| - alpha, 0)."""
    if s > alpha:
        return s - alpha
    if s < -alpha:
        return s + alpha
    return 0.0


def leaf_value(residuals_in_leaf: np.ndarray, lam: float, alpha: float) -> float:
    """Optimal penalized leaf weight for a set of residuals."""
    g = np.asarray(residuals_in_leaf, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise InvalidInputError("leaf_value requires a non-empty 1-D residual vector")
    if lam < 0.0 or alpha < 0.0:
        raise InvalidInputError("penalty weights lam and alpha must be >= 0")
    s = math.fsum(g.tolist())
    return soft_threshold(s, alpha) / (g.size + lam)


class _PresortedData:
    """Feature-major values plus per-feature stable sort order, built once
    per training matrix and shared by every tree of a boosting run."""

    def __init__(self, X: np.ndarray):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.n, self.m = X.shape
        self.Xt = np.ascontiguousarray(self.X.T)
        self.sorted_rows = np.ascontiguousarray(
            np.argsort(self.X, axis=0, kind="stable").T.astype(np.int32)
        )

    def restrict(self, rows: np.ndarray) -> np.ndarray:
        """Sorted row lists filtered to a subset, preserving order."""
        keep = np.zeros(self.n, dtype=np.uint8)
        keep[rows] = 1
        sub, _ = _kernels.partition_sorted(self.sorted_rows, keep, int(keep.sum()))
        return sub


def _build_tree(data: _PresortedData, g: np.ndarray, node_rows: np.ndarray,
                max_depth: int, lam: float, alpha: float) -> RegressionTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(rows_sorted: np.ndarray, depth: int) -> int:
        node = new_node()
        rows = rows_sorted[0]
        g_node = g[rows]
        splittable = (
            depth < max_depth
            and rows.size >= 2
            and g_node.min() < g_node.max()  # pure nodes stop immediately
        )
        if splittable:
            feat, thr, gain, _ = _kernels.scan_best_split(data.Xt, rows_sorted, g, lam, alpha)
        else:
            feat, thr, gain = -1, 0.0, 0.0
        if feat < 0 or gain <= 0.0:
            value[node] = leaf_value(g_node, lam, alpha)
            return node
        go_left = np.zeros(data.n, dtype=np.uint8)
        go_left[rows] = data.X[rows, feat] <= thr
        n_left = int(go_left.sum())
        L, R = _kernels.partition_sorted(rows_sorted, go_left, n_left)
        feature[node] = feat
        threshold[node] = thr
        left[node] = grow(L, depth + 1)
        right[node] = grow(R, depth + 1)
        return node

    grow(node_rows, 0)
    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )


def fit_tree(X: np.ndarray, g: np.ndarray, row_subset: np.ndarray,
             max_depth: int, lam: float, alpha: float) -> RegressionTree:
    """Fit one exact-greedy tree to pseudo-residuals on a row subset."""
    X, g = validate_xy(X, g)
    rows = np.asarray(row_subset, dtype=np.int64)
    if rows.ndim != 1 or rows.size == 0:
        raise InvalidInputError("row_subset must be a non-empty index vector")
    if rows.min() < 0 or rows.max() >= X.shape[0]:
        raise InvalidInputError("row_subset contains out-of-range indices")
    if np.unique(rows).size != rows.size:
        raise InvalidInputError("row_subset contains duplicate indices")
    if max_depth < 1:
        raise InvalidInputError("max_depth must be >= 1")
    if lam < 0.0 or alpha < 0.0:
        raise InvalidInputError("penalty weights lam and alpha must be >= 0")
    data = _PresortedData(X)
    return _build_tree(data, g, data.restrict(rows), max_depth, lam, alpha)
