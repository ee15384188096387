"""Time each hot kernel with the numba and pure-numpy backends.

    python3 benchmarks/bench_kernels.py [--repeats 5] [--nodes 1024]
"""
import argparse
import time

import numpy as np

from dynplace import kernels
from dynplace.dictlearn import safe_step
from dynplace.filters import FilterSpec, chebyshev_coefficients
from dynplace.graph import laplacian, random_sensor_graph


def best_of(fn, args, repeats):
    fn(*args)  # warm-up (and jit compile)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n):
    rng = np.random.default_rng(0)
    g = random_sensor_graph(n, seed=0)
    indptr, indices = g.csr
    L = laplacian(g, sparse=True)
    lmax = 1.01 * float(L.diagonal().max()) * 2
    coeffs = chebyshev_coefficients(FilterSpec(), lmax, 20)
    A = rng.standard_normal((n, 20))
    X = rng.standard_normal((n, 20))
    B = rng.standard_normal((n, 20))
    Z = B @ B.T
    yield "multi_source_bfs", kernels.multi_source_bfs, (indptr, indices, rng.choice(n, 8, replace=False))
    yield "bfs_within", kernels.bfs_within, (indptr, indices, np.int64(0), np.int64(3))
    yield "chebyshev_apply", kernels.chebyshev_apply, (
        L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data.astype(float), rng.standard_normal((n, 8)), coeffs, lmax,
    )
    yield "ista", kernels.ista, (A, X, np.ones((20, 20)), safe_step(A, 1.0), 1.0, 1e-8, np.int64(1000), np.zeros(0))
    yield "greedy_det", kernels.greedy_det, (Z, np.int64(8), 1e-10)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--nodes", type=int, nargs="+", default=[256, 1024, 4096])
    args = ap.parse_args()
    print(f"{'kernel':18s} {'N':>6s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for n in args.nodes:
        for name, kernel, kargs in cases(n):
            tj = best_of(kernel.jitted, kargs, args.repeats)
            tn = best_of(kernel.fallback, kargs, args.repeats)
            print(f"{name:18s} {n:6d} {1e3 * tj:10.3f} {1e3 * tn:10.3f} {tn / tj:8.1f}x")


if __name__ == "__main__":
    main()
