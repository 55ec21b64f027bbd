"""Timing comparison of the numba kernels against the pure numpy fallback.

Run from the repo root after an editable install:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --paths 500000 --states 16

The numba backend must be active (leave RISKSTOP_NUMBA unset or truthy).
Both implementations are pulled from riskstop._kernels.IMPLEMENTATIONS and
timed on identical inputs; the table reports median wall time over
--repeats runs after a JIT warmup call.
"""
import argparse
import os
import time

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")  # tbb here is too old

import numpy as np

from riskstop._backend import USE_NUMBA, backend_name
from riskstop._kernels import IMPLEMENTATIONS


def median_time(fn, args, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    times.sort()
    return times[len(times) // 2]


def build_cases(n, n_paths, rng):
    P = rng.uniform(size=(n, n))
    P /= P.sum(axis=1, keepdims=True)
    g = rng.uniform(0.05, 0.5, n)
    G = rng.uniform(0.0, 2.0, n)
    W = np.exp(g)[:, None] * P
    stop = np.exp(G)
    V0 = np.stack([np.ones(n), stop], axis=1)
    cdf = np.cumsum(P, axis=1)
    region = np.zeros(n, dtype=bool)
    region[-1] = True

    rates = rng.uniform(0.5, 2.0, n)
    J = rng.uniform(size=(n, n))
    np.fill_diagonal(J, 0.0)
    J /= J.sum(axis=1, keepdims=True)
    jcdf = np.cumsum(J, axis=1)

    return [
        ("lockstep_bellman", (W, stop, V0, 1e-12, 200_000)),
        ("backward_minclip", (W, stop, V0, list(range(0, 4097, 256)))),
        ("dtmc_paths", (cdf, g, G, region, 0, n_paths, 256, 9)),
        ("ctmc_paths", (rates, jcdf, g, G, region, 0, n_paths, 50.0, 9)),
    ]


def main():
    ap = argparse.ArgumentParser(
        description="compare numba kernels with the numpy fallback")
    ap.add_argument("--paths", type=int, default=200_000,
                    help="Monte Carlo paths per kernel call")
    ap.add_argument("--states", type=int, default=8,
                    help="chain size for all cases")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timed runs per kernel (median reported)")
    args = ap.parse_args()

    if not USE_NUMBA:
        raise SystemExit(
            "numba backend is disabled (RISKSTOP_NUMBA=0); nothing to compare")

    rng = np.random.default_rng(7)
    cases = build_cases(args.states, args.paths, rng)

    print(f"backend={backend_name()}  states={args.states}  "
          f"paths={args.paths}  repeats={args.repeats}")
    print(f"{'kernel':<18} {'numpy':>11} {'numba':>11} {'speedup':>9}")
    for name, a in cases:
        f_np = IMPLEMENTATIONS["numpy"][name]
        f_nb = IMPLEMENTATIONS["numba"][name]
        f_nb(*a)  # trigger compilation outside the timed region
        t_np = median_time(f_np, a, args.repeats)
        t_nb = median_time(f_nb, a, args.repeats)
        print(f"{name:<18} {t_np * 1e3:>9.2f}ms {t_nb * 1e3:>9.2f}ms "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
