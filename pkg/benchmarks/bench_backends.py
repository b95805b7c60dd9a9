#!/usr/bin/env python3
"""Compare the compiled coordinate-descent kernel against the NumPy
fallback on cold solves, warm path traces, and a wide elastic-net solve.

Usage: python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from lassosi._kernels import available_backends, get_backend
from lassosi.homotopy import ParamLine, compute_solution_path
from lassosi.lasso import GramLassoSolver


def _instance(seed, n, p, signal=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:signal] = 0.5
    y = X @ beta + rng.standard_normal(n)
    return X, y


def _line(X, y):
    eta = X[:, 0] / (X[:, 0] @ X[:, 0])
    s2 = float(eta @ eta)
    b = eta / s2
    a = y - b * float(eta @ y)
    w = 20 * np.sqrt(s2)
    return ParamLine(a, b, -w, w)


def bench_cold_solves(kernel, reps, n=100, p=200, lam=3.0):
    X, y = _instance(0, n, p, signal=10)
    solver = GramLassoSolver(X, lam, kernel=kernel)
    t0 = time.perf_counter()
    for _ in range(reps):
        solver.solve(y)
    return (time.perf_counter() - t0) / reps


def bench_path_trace(kernel, reps, n=100, p=60, lam=1.0):
    X, y = _instance(1, n, p, signal=8)
    line = _line(X, y)
    t0 = time.perf_counter()
    segs = 0
    for _ in range(reps):
        segs = len(compute_solution_path(X, lam, 0.0, line, kernel=kernel))
    return (time.perf_counter() - t0) / reps, segs


def bench_elastic_wide(kernel, reps, n=100, p=2000, lam=0.02, delta=0.1):
    X, y = _instance(2, n, p, signal=20)
    solver = GramLassoSolver(X, lam, delta, kernel=kernel)
    t0 = time.perf_counter()
    for _ in range(reps):
        sol = solver.solve(y)
    return (time.perf_counter() - t0) / reps, sol.active.size


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="fewer repetitions")
    args = ap.parse_args()
    reps = 2 if args.quick else 5

    names = available_backends()
    print(f"backends: {names}\n")
    rows = []
    for name in names:
        kernel = get_backend(name)
        t_cold = bench_cold_solves(kernel, reps)
        t_path, segs = bench_path_trace(kernel, reps)
        t_en, nact = bench_elastic_wide(kernel, max(1, reps // 2))
        rows.append((name, t_cold, t_path, segs, t_en, nact))

    print(f"{'backend':<8} {'cold solve':>12} {'path trace':>12} {'segs':>5} "
          f"{'EN wide':>12} {'|A|':>5}")
    for name, t_cold, t_path, segs, t_en, nact in rows:
        print(f"{name:<8} {t_cold*1e3:>10.2f}ms {t_path*1e3:>10.2f}ms {segs:>5d} "
              f"{t_en*1e3:>10.2f}ms {nact:>5d}")
    if len(rows) == 2:
        base = {r[0]: r for r in rows}
        if "python" in base and "cython" in base:
            py, cy = base["python"], base["cython"]
            print(f"\nspeedup cython/python: cold {py[1]/cy[1]:.1f}x, "
                  f"path {py[2]/cy[2]:.1f}x, elastic {py[4]/cy[4]:.1f}x")


if __name__ == "__main__":
    main()
