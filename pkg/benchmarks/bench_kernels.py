"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--sizes small|full]

The same functions run through both code paths regardless of the
EMBLEND_NUMBA flag; the first numba call includes JIT compilation and is
excluded by a warmup round.
"""
import argparse
import time

import numpy as np

from emblend import kernels


def timeit(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_group_stats(n, d, groups, rng):
    x = rng.normal(size=(n, d))
    labels = rng.integers(0, groups, size=n).astype(np.int64)
    args = (np.ascontiguousarray(x), np.ascontiguousarray(labels), groups)
    rows = []
    t_np = timeit(kernels._np_group_distance_stats, *args)
    rows.append(("numpy", t_np))
    if kernels._NUMBA_IMPORTABLE:
        kernels._nb_group_distance_stats(*args)  # warmup / compile
        rows.append(("numba", timeit(kernels._nb_group_distance_stats, *args)))
    return rows


def bench_kmeans_assign(n, d, k, rng):
    x = rng.normal(size=(n, d))
    c = rng.normal(size=(k, d))
    args = (np.ascontiguousarray(x), np.ascontiguousarray(c))
    rows = [("numpy", timeit(kernels._np_kmeans_assign, *args))]
    if kernels._NUMBA_IMPORTABLE:
        kernels._nb_kmeans_assign(*args)
        rows.append(("numba", timeit(kernels._nb_kmeans_assign, *args)))
    return rows


def bench_dedup(n, d, rng):
    x = rng.normal(size=(n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    args = (np.ascontiguousarray(x), 0.05)
    rows = [("numpy", timeit(kernels._np_dedup_scan, *args))]
    if kernels._NUMBA_IMPORTABLE:
        kernels._nb_dedup_scan(*args)
        rows.append(("numba", timeit(kernels._nb_dedup_scan, *args)))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", choices=("small", "full"), default="full")
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    if args.sizes == "full":
        cases = [
            ("group_distance_stats", bench_group_stats, [(2000, 32, 4), (4000, 32, 4)]),
            ("kmeans_assign", bench_kmeans_assign, [(10000, 32, 100), (20000, 64, 100)]),
            ("dedup_scan", bench_dedup, [(2000, 32), (5000, 32)]),
        ]
    else:
        cases = [
            ("group_distance_stats", bench_group_stats, [(500, 16, 4)]),
            ("kmeans_assign", bench_kmeans_assign, [(2000, 16, 50)]),
            ("dedup_scan", bench_dedup, [(500, 16)]),
        ]

    print(f"active backend for library calls: {kernels.active_backend()}\n")
    print(f"{'kernel':<24} {'case':<20} {'path':<7} {'seconds':>10} {'speedup':>8}")
    for name, fn, grids in cases:
        for grid in grids:
            rows = fn(*grid, rng)
            base = rows[0][1]
            for path, seconds in rows:
                speedup = base / seconds if seconds > 0 else float("inf")
                print(f"{name:<24} {str(grid):<20} {path:<7} {seconds:>10.4f} "
                      f"{speedup:>7.1f}x")
    if not kernels._NUMBA_IMPORTABLE:
        print("\nnumba not importable: only the numpy fallback was timed")


if __name__ == "__main__":
    main()
