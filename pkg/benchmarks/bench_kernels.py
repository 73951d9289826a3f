#!/usr/bin/env python3
"""Time the hot kernels on the compiled path against the numpy fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 5]

Run it twice to see both sides from a cold start:
    python3 benchmarks/bench_kernels.py            # numba if installed
    BATTID_NO_NUMBA=1 python3 benchmarks/bench_kernels.py
"""
import argparse
import time

import numpy as np

from battid import _kernels
from battid._accel import USING_NUMBA
from battid.bspline import uniform_clamped
from battid.laguerre import discretize


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, args.n)
    bank = discretize(1e-3, 1.0)
    kv = uniform_clamped(0.0, 1.0, 21)
    z = rng.uniform(0, 1, args.n)
    span = kv.find_span(z)

    cascade_ref, rc_ref, basis_ref = _kernels.numpy_reference()

    cases = [
        ("cascade_filter",
         lambda: _kernels.cascade_filter(bank.ad, bank.bd, bank.cmat, x),
         lambda: cascade_ref(bank.ad, bank.bd, bank.cmat, x)),
        ("rc_pair",
         lambda: _kernels.rc_pair(0.95, 1e-3, 0.99, 1e-4, 0.0, 0.0, x),
         lambda: rc_ref(0.95, 1e-3, 0.99, 1e-4, 0.0, 0.0, x)),
        ("basis_rows",
         lambda: _kernels.basis_rows(kv.knots, 3, z, span, kv.h),
         lambda: basis_ref(kv.knots, 3, z, span, kv.h)),
    ]

    print(f"kernel path: {_kernels.KERNEL_PATH} "
          f"(numba {'available' if USING_NUMBA else 'off'}), "
          f"n = {args.n:,}, best of {args.repeat}")
    print(f"{'kernel':<16}{'selected':>12}{'numpy ref':>12}{'speedup':>10}")
    for name, fast, slow in cases:
        fast()  # warm any compilation
        t_fast = timeit(fast, args.repeat)
        t_slow = timeit(slow, max(1, args.repeat // 2))
        ratio = t_slow / t_fast if t_fast > 0 else float("inf")
        print(f"{name:<16}{t_fast * 1e3:>10.1f}ms{t_slow * 1e3:>10.1f}ms"
              f"{ratio:>9.1f}x")


if __name__ == "__main__":
    main()
