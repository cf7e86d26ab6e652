"""Benchmark the compiled coherence kernel against the pure-python fallback.

Times the six-carbon CPMG coherence scan with both backends on each
requested tau grid size and prints the speedup. Small grids reflect the
hyperfine-calibration hot path (thousands of short scans); large grids
reflect dense spectroscopy sweeps. Usage:

    python3 benchmarks/bench_coherence_kernel.py --points 61 20000 --repeats 5
"""
import argparse
import importlib
import time

import numpy as np


def best_time(func, repeats, min_calls=3):
    # best-of-repeats, each sample averaging enough calls to be measurable
    best = float("inf")
    for _ in range(repeats):
        calls = min_calls
        start = time.perf_counter()
        for _ in range(calls):
            func()
        best = min(best, (time.perf_counter() - start) / calls)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, nargs="+", default=[61, 20000],
                        help="tau grid sizes to benchmark")
    parser.add_argument("--repeats", type=int, default=5, help="timing repeats, best-of")
    parser.add_argument("--n", type=int, default=32, help="number of CPMG pulses")
    args = parser.parse_args()

    from nvbath import dynamics, model
    from nvbath import _kernels_py as py_backend

    cfg = model.default_config()
    wz1, wx1, wl = dynamics._kernel_args(cfg.carbons, cfg.constants)

    backends = [("python", py_backend)]
    try:
        compiled = importlib.import_module("nvbath._kernels")
        backends.insert(0, ("cython", compiled))
    except ImportError:
        print("compiled backend not available; timing the fallback only")

    print(f"coherence_scan: {len(cfg.carbons)} carbons, N={args.n}, best of {args.repeats}")
    print(f"{'points':>8} {'cython':>12} {'python':>12} {'speedup':>9} {'max |diff|':>12}")
    for points in args.points:
        taus = np.linspace(0.1, 3.0, points)
        row = {}
        for name, mod in backends:
            w = mod.coherence_scan(wz1, wx1, wl, taus, args.n)
            dt = best_time(lambda m=mod: m.coherence_scan(wz1, wx1, wl, taus, args.n),
                           args.repeats)
            row[name] = (dt, w)
        if len(row) == 2:
            diff = np.abs(row["cython"][1] - row["python"][1]).max()
            speedup = row["python"][0] / row["cython"][0]
            print(f"{points:>8} {row['cython'][0] * 1e3:>9.3f} ms {row['python'][0] * 1e3:>9.3f} ms "
                  f"{speedup:>8.1f}x {diff:>12.3e}")
        else:
            print(f"{points:>8} {'-':>12} {row['python'][0] * 1e3:>9.3f} ms")


if __name__ == "__main__":
    main()
