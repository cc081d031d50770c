"""Benchmark the compiled Jacobi sweep against the pure-python lane.

Runs the full SVD on random square matrices once per available sweep
implementation, reports the best wall time per lane and the speedup, and
cross-checks that both lanes produce the same singular values.

Usage: python3 benchmarks/bench_svd.py [--sizes 16,32,64,128] [--repeats 3]
"""

import argparse
import time

import numpy as np

from degnn._kernels import active_lane, sweep_implementations
from degnn.spectral import svd


def best_time(matrix, sweep, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        started = time.perf_counter()
        result = svd(matrix, sweep=sweep)
        best = min(best, time.perf_counter() - started)
    return best, result


def main():
    parser = argparse.ArgumentParser(
        description="compare SVD sweep kernels")
    parser.add_argument("--sizes", default="16,32,64,128",
                        help="comma-separated square matrix sizes")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repetitions per cell (best is kept)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    lanes = sweep_implementations()
    rng = np.random.default_rng(args.seed)

    print(f"default lane: {active_lane()}")
    print(f"available lanes: {', '.join(sorted(lanes))}")
    header = f"{'n':>6} " + "".join(f"{name + ' (ms)':>16}" for name in lanes)
    if len(lanes) > 1:
        header += f"{'speedup':>10}{'max |diff|':>14}"
    print(header)

    for n in sizes:
        matrix = rng.normal(size=(n, n))
        times = {}
        sigmas = {}
        for name, sweep in lanes.items():
            elapsed, result = best_time(matrix, sweep, args.repeats)
            times[name] = elapsed
            sigmas[name] = result.sigma
        row = f"{n:>6} " + "".join(
            f"{times[name] * 1e3:>16.2f}" for name in lanes
        )
        if len(lanes) > 1:
            speedup = times["python"] / times["compiled"]
            diff = float(np.max(np.abs(sigmas["python"] - sigmas["compiled"])))
            row += f"{speedup:>9.1f}x{diff:>14.2e}"
        print(row)


if __name__ == "__main__":
    main()
