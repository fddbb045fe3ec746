#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs the two hot paths (all-pairs DTW over a round of segments, and the
group-score scan over candidate pairs) with both backends and prints a
timing table. The numpy fallback is what you get with PREFLAB_NO_NUMBA=1.

Usage: python benchmarks/bench_kernels.py [--behaviors N] [--steps L]
"""

import argparse
import time

import numpy as np

from preflab import _kernels


def time_call(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_dtw(n, steps, dims):
    gen = np.random.default_rng(0)
    stack = gen.standard_normal((n, steps, dims))
    rows = []
    t_np, ref = time_call(_kernels.dtw_pairwise_numpy, stack, repeat=1)
    rows.append(("dtw_pairwise", "numpy", t_np))
    if _kernels.HAS_NUMBA:
        _kernels.dtw_pairwise_numba(stack[:4])  # compile outside the timer
        t_nb, out = time_call(_kernels.dtw_pairwise_numba, stack)
        rows.append(("dtw_pairwise", "numba", t_nb))
        assert np.allclose(out, ref, rtol=1e-10), "backends disagree"
    return rows


def bench_group_scan(n_nodes, n_behaviors):
    gen = np.random.default_rng(1)
    sym = gen.random((n_behaviors, n_behaviors))
    dis = (sym + sym.T) / 2
    np.fill_diagonal(dis, 0.0)
    sizes = gen.integers(2, 9, size=n_nodes)
    leaf_lists = [gen.choice(n_behaviors, size=s, replace=False) for s in sizes]
    offsets = np.zeros(n_nodes + 1, dtype=np.int64)
    for k, ll in enumerate(leaf_lists):
        offsets[k + 1] = offsets[k] + ll.size
    flat = np.concatenate(leaf_lists).astype(np.int64)
    counts = sizes.astype(np.float64)
    intra = gen.random(n_nodes) * 0.01
    idx = np.arange(n_nodes)
    pairs = np.array(
        [(i, j) for i in idx for j in idx[i + 1 :]][:20000], dtype=np.int64
    )
    args = (dis, flat, offsets, intra, counts, pairs)
    rows = []
    t_np, ref = time_call(_kernels.group_score_scan_numpy, *args, repeat=1)
    rows.append(("group_score_scan", "numpy", t_np))
    if _kernels.HAS_NUMBA:
        _kernels.group_score_scan_numba(dis, flat, offsets, intra, counts, pairs[:8])
        t_nb, out = time_call(_kernels.group_score_scan_numba, *args)
        rows.append(("group_score_scan", "numba", t_nb))
        assert np.allclose(out, ref, rtol=1e-10), "backends disagree"
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--behaviors", type=int, default=150)
    parser.add_argument("--steps", type=int, default=25)
    parser.add_argument("--dims", type=int, default=9)
    parser.add_argument("--nodes", type=int, default=250)
    args = parser.parse_args()

    print(f"backend active by default: {_kernels.active_backend()}")
    rows = bench_dtw(args.behaviors, args.steps, args.dims)
    rows += bench_group_scan(args.nodes, args.behaviors)

    print(f"\n{'kernel':<18} {'backend':<8} {'seconds':>10} {'speedup':>9}")
    base = {}
    for kernel, backend, secs in rows:
        if backend == "numpy":
            base[kernel] = secs
        speedup = base[kernel] / secs if secs else float("inf")
        print(f"{kernel:<18} {backend:<8} {secs:>10.4f} {speedup:>8.1f}x")


if __name__ == "__main__":
    main()
