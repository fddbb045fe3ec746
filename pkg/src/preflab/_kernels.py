"""Hot numeric kernels with numba-accelerated and pure-numpy variants.

Every kernel exists twice: a ``*_numpy`` reference implementation and, when
numba is importable, an ``@njit`` twin compiled without fastmath so both
paths agree to within floating-point associativity. The module-level aliases
(``dtw_cost``, ``dtw_pairwise``, ``group_score_scan``) point at the active
variant.

Set ``PREFLAB_NO_NUMBA=1`` to force the pure-numpy path (useful for
debugging and for the benchmark in ``benchmarks/bench_kernels.py``).
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("PREFLAB_NO_NUMBA", "").strip() not in ("", "0", "false")

try:
    if _DISABLED:
        raise ImportError("numba disabled via PREFLAB_NO_NUMBA")
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def dtw_cost_numpy(a, b):
    """Classic DTW alignment cost between two (L, d) series.

    Local cost is the Euclidean distance between rows; moves are the
    standard (i-1,j), (i,j-1), (i-1,j-1) steps, each adding the local cost
    once. Lengths may differ; dimensionality must match.
    """
    n, m = a.shape[0], b.shape[0]
    # full local cost matrix, vectorized
    diff = a[:, None, :] - b[None, :, :]
    cost = np.sqrt((diff * diff).sum(axis=2))
    dp = np.empty((n, m))
    dp[0, 0] = cost[0, 0]
    for j in range(1, m):
        dp[0, j] = dp[0, j - 1] + cost[0, j]
    for i in range(1, n):
        dp[i, 0] = dp[i - 1, 0] + cost[i, 0]
        for j in range(1, m):
            best = dp[i - 1, j - 1]
            if dp[i - 1, j] < best:
                best = dp[i - 1, j]
            if dp[i, j - 1] < best:
                best = dp[i, j - 1]
            dp[i, j] = cost[i, j] + best
    return float(dp[n - 1, m - 1])


def dtw_pairwise_numpy(stack):
    """All-pairs DTW over a (n, L, d) stack of equal-length series.

    Returns the symmetric (n, n) distance matrix with a zero diagonal.
    """
    n = stack.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = dtw_cost_numpy(stack[i], stack[j])
    return out


def group_score_scan_numpy(disagreement, leaf_idx, offsets, intra, counts, pairs):
    """Eq.-style group score for every candidate node pair.

    disagreement : (n, n) symmetric pairwise disagreement matrix.
    leaf_idx     : flat int array of leaf indices for all candidate nodes.
    offsets      : (c+1,) node k owns leaf_idx[offsets[k]:offsets[k+1]].
    intra        : (c,) precomputed mean within-node pair disagreement.
    counts       : (c,) leaf counts per node.
    pairs        : (p, 2) candidate node index pairs to score.

    score = v_inter / (r * v_intra + 1e-8) with v_inter the mean
    disagreement over the cross product, v_intra the mean of the two
    nodes' intra scores, and r the larger/smaller size ratio.
    """
    p = pairs.shape[0]
    out = np.empty(p)
    for t in range(p):
        k1, k2 = pairs[t, 0], pairs[t, 1]
        ix1 = leaf_idx[offsets[k1]:offsets[k1 + 1]]
        ix2 = leaf_idx[offsets[k2]:offsets[k2 + 1]]
        v_inter = disagreement[np.ix_(ix1, ix2)].mean()
        v_intra = 0.5 * (intra[k1] + intra[k2])
        c1, c2 = counts[k1], counts[k2]
        r = max(c1, c2) / min(c1, c2)
        out[t] = v_inter / (r * v_intra + 1e-8)
    return out


if HAS_NUMBA:

    @njit(cache=True)
    def _dtw_cost_jit(a, b):
        n, m = a.shape[0], b.shape[0]
        d = a.shape[1]
        dp = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(d):
                    diff = a[i, k] - b[j, k]
                    s += diff * diff
                c = np.sqrt(s)
                if i == 0 and j == 0:
                    dp[0, 0] = c
                elif i == 0:
                    dp[0, j] = dp[0, j - 1] + c
                elif j == 0:
                    dp[i, 0] = dp[i - 1, 0] + c
                else:
                    best = dp[i - 1, j - 1]
                    if dp[i - 1, j] < best:
                        best = dp[i - 1, j]
                    if dp[i, j - 1] < best:
                        best = dp[i, j - 1]
                    dp[i, j] = c + best
        return dp[n - 1, m - 1]

    def dtw_cost_numba(a, b):
        return float(_dtw_cost_jit(a, b))

    @njit(cache=True, parallel=True)
    def _dtw_pairwise_jit(stack):
        n = stack.shape[0]
        out = np.zeros((n, n))
        total = n * (n - 1) // 2
        for t in prange(total):
            # unrank the flat upper-triangle index
            i = int((2 * n - 1 - np.sqrt((2 * n - 1) ** 2 - 8 * t)) / 2)
            j = t - i * (2 * n - i - 1) // 2 + i + 1
            v = _dtw_cost_jit(stack[i], stack[j])
            out[i, j] = v
            out[j, i] = v
        return out

    def dtw_pairwise_numba(stack):
        return _dtw_pairwise_jit(np.ascontiguousarray(stack))

    @njit(cache=True)
    def _group_score_scan_jit(disagreement, leaf_idx, offsets, intra, counts, pairs):
        p = pairs.shape[0]
        out = np.empty(p)
        for t in range(p):
            k1, k2 = pairs[t, 0], pairs[t, 1]
            s = 0.0
            n1 = offsets[k1 + 1] - offsets[k1]
            n2 = offsets[k2 + 1] - offsets[k2]
            for u in range(offsets[k1], offsets[k1 + 1]):
                for v in range(offsets[k2], offsets[k2 + 1]):
                    s += disagreement[leaf_idx[u], leaf_idx[v]]
            v_inter = s / (n1 * n2)
            v_intra = 0.5 * (intra[k1] + intra[k2])
            c1, c2 = counts[k1], counts[k2]
            if c1 >= c2:
                r = c1 / c2
            else:
                r = c2 / c1
            out[t] = v_inter / (r * v_intra + 1e-8)
        return out

    def group_score_scan_numba(disagreement, leaf_idx, offsets, intra, counts, pairs):
        return _group_score_scan_jit(
            disagreement,
            leaf_idx.astype(np.int64),
            offsets.astype(np.int64),
            intra.astype(np.float64),
            counts.astype(np.float64),
            pairs.astype(np.int64),
        )

    dtw_cost = dtw_cost_numba
    dtw_pairwise = dtw_pairwise_numba
    group_score_scan = group_score_scan_numba
else:
    dtw_cost = dtw_cost_numpy
    dtw_pairwise = dtw_pairwise_numpy
    group_score_scan = group_score_scan_numpy


def active_backend():
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return "numba" if HAS_NUMBA else "numpy"
