"""Benchmark the compiled kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--samples N] [--repeat R]
"""

import argparse
import time

import numpy as np

from geopath import _kernels
from geopath._kernels import _pure


def _time(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if _kernels.BACKEND != "compiled":
        print("compiled kernel not available; timing the pure backend only")

    rng = np.random.default_rng(0)
    rows = []
    for name, shape, fn_args in [
        ("endpoints  m=256 d=2", (args.samples, 256, 2), (3.0,)),
        ("endpoints  m=256 d=3", (args.samples, 256, 3), (3.0,)),
        ("logdensity n=32  d=2", (args.samples, 32, 2), (0.08,)),
        ("logdensity n=64  d=2", (args.samples, 64, 2), (0.08,)),
    ]:
        incr = rng.standard_normal(shape) * np.sqrt(1.0 / shape[1])
        kind = "endpoints" if name.startswith("endpoints") else "logdensity"
        pure_fn = _pure.sphere_endpoints if kind == "endpoints" else _pure.sphere_log_density
        fast_fn = (
            _kernels.sphere_endpoints if kind == "endpoints" else _kernels.sphere_log_density
        )
        t_pure = _time(pure_fn, incr, *fn_args, repeat=args.repeat)
        if _kernels.BACKEND == "compiled":
            t_fast = _time(fast_fn, incr, *fn_args, repeat=args.repeat)
            gap = float(np.max(np.abs(pure_fn(incr, *fn_args) - fast_fn(incr, *fn_args))))
            rows.append((name, t_pure, t_fast, t_pure / t_fast, gap))
        else:
            rows.append((name, t_pure, None, None, 0.0))

    print(f"\nbackend: {_kernels.BACKEND}, batch = {args.samples} samples")
    print(f"{'kernel':24s} {'pure [ms]':>10s} {'compiled [ms]':>14s} {'speedup':>8s} {'max gap':>10s}")
    for name, tp, tf, sp, gap in rows:
        tf_s = f"{tf * 1e3:14.2f}" if tf else f"{'-':>14s}"
        sp_s = f"{sp:8.2f}" if sp else f"{'-':>8s}"
        print(f"{name:24s} {tp * 1e3:10.2f} {tf_s} {sp_s} {gap:10.2e}")


if __name__ == "__main__":
    main()
