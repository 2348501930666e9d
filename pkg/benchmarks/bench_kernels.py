#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the three hot paths (batched tangency solves, random-scheme trials,
greedy trajectories) on identical inputs and prints a speedup table.

    python benchmarks/bench_kernels.py [--trials T] [--repeat R]
"""
import argparse
import time

import numpy as np

from qest._kernels import pykernels
from qest.core import Mode, quadrature_grid, sample_prior

try:
    from qest._kernels import cykernels
except ImportError:
    cykernels = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_tangency(backend, rng, B):
    V = rng.normal(scale=0.05, size=(B, 3))
    M = rng.normal(size=(B, 3, 3))
    A = np.einsum("bij,bkj->bik", M, M) * 0.02
    return lambda: backend.tangency_batch(V, A, tol=1e-9, maxit=200)

def bench_random(backend, rng, T, N):
    nodes, w = quadrature_grid(Mode.FULL_3D, N + 2)
    nodes = np.ascontiguousarray(nodes)
    wn = np.ascontiguousarray(w[:, None] * nodes)
    states = sample_prior(Mode.FULL_3D, rng, T)
    axes = sample_prior(Mode.FULL_3D, rng, T * N).reshape(T, N, 3)
    unif = rng.uniform(size=(T, N))
    return lambda: backend.random_scheme_run(nodes, wn, states, axes, unif)


def bench_greedy(backend, rng, T, N):
    nodes, w = quadrature_grid(Mode.FULL_3D, N + 2)
    nodes = np.ascontiguousarray(nodes)
    w = np.ascontiguousarray(w)
    states = sample_prior(Mode.FULL_3D, rng, T)
    unif = rng.uniform(size=(T, N))
    return lambda: backend.greedy_mc_run(nodes, w, states, unif)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cases = [
        ("tangency_batch B=4096", bench_tangency, dict(B=4096)),
        ("random_scheme N=60", bench_random, dict(T=args.trials, N=60)),
        ("random_scheme N=240", bench_random, dict(T=max(32, args.trials // 8), N=240)),
        ("greedy_mc N=30", bench_greedy, dict(T=args.trials, N=30)),
        ("greedy_mc N=60", bench_greedy, dict(T=max(32, args.trials // 4), N=60)),
    ]
    print(f"{'case':26s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s}")
    for label, make, kwargs in cases:
        t_py = timeit(make(pykernels, np.random.default_rng(1), **kwargs), args.repeat)
        if cykernels is None:
            print(f"{label:26s} {t_py:10.3f} {'n/a':>11s} {'n/a':>8s}")
            continue
        t_cy = timeit(make(cykernels, np.random.default_rng(1), **kwargs), args.repeat)
        print(f"{label:26s} {t_py:10.3f} {t_cy:11.3f} {t_py / t_cy:7.1f}x")
    if cykernels is None:
        print("\ncompiled backend unavailable; showing fallback timings only")


if __name__ == "__main__":
    main()
