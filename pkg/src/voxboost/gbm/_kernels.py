"""Numba kernels for exact-greedy split search and tree routing.

The kernels are deliberately sequential: split-gain prefix sums run
left-to-right in sorted-threshold order and features are scanned in
ascending index order, so results are bit-reproducible and ties resolve
to the lowest (feature, threshold) pair.  Grid-search level parallelism
happens outside these kernels, keeping every individual fit identical to
the sequential reference.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def scan_best_split(Xt, sorted_rows, g, lam, alpha):
    """Best (feature, threshold) for one node by exhaustive midpoint scan.

    Xt          : (n_features, n_total) feature-major value matrix
    sorted_rows : (n_features, n_node) row ids of this node, ascending by
                  that feature's value (stable order)
    g           : (n_total,) pseudo-residuals
    Returns (feature, threshold, gain, parent_sum); feature == -1 when no
    candidate has strictly positive gain.
    """
    m, n = sorted_rows.shape
    s_tot = 0.0
    for i in range(n):
        s_tot += g[sorted_rows[0, i]]
    t = abs(s_tot) - alpha
    if t < 0.0:
        t = 0.0
    phi_parent = 0.5 * t * t / (n + lam)

    best_gain = 0.0
    best_feat = -1
    best_thr = 0.0
    for j in range(m):
        acc = 0.0
        for i in range(n - 1):
            r = sorted_rows[j, i]
            acc += g[r]
            x0 = Xt[j, r]
            x1 = Xt[j, sorted_rows[j, i + 1]]
            if x0 < x1:
                tl = abs(acc) - alpha
                if tl < 0.0:
                    tl = 0.0
                sr = s_tot - acc
                tr = abs(sr) - alpha
                if tr < 0.0:
                    tr = 0.0
                nl = i + 1.0
                nr = n - i - 1.0
                gain = 0.5 * (tl * tl / (nl + lam) + tr * tr / (nr + lam)) - phi_parent
                if gain > best_gain:
                    thr = 0.5 * (x0 + x1)
                    # Adjacent representable values can round the midpoint
                    # up to x1; clamp so `value <= thr` keeps x1 on the right.
                    if thr >= x1:
                        thr = x0
                    best_gain = gain
                    best_feat = j
                    best_thr = thr
    return best_feat, best_thr, best_gain, s_tot


@njit(cache=True)
def partition_sorted(sorted_rows, left_u8, n_left):
    """Stable-partition every feature's sorted row list by leaf membership."""
    m, n = sorted_rows.shape
    n_right = n - n_left
    L = np.empty((m, n_left), dtype=np.int32)
    R = np.empty((m, n_right), dtype=np.int32)
    for j in range(m):
        a = 0
        b = 0
        for i in range(n):
            r = sorted_rows[j, i]
            is_l = left_u8[r]
            # Unconditional stores with clamped cursors keep the inner loop
            # branch-predictable; the cursor only advances on membership.
            if a < n_left:
                L[j, a] = r
            if b < n_right:
                R[j, b] = r
            a += is_l
            b += 1 - is_l
    return L, R


@njit(cache=True)
def predict_tree_kernel(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
