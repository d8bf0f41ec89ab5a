#!/usr/bin/env python3
"""Benchmark the synthesis filter-bank kernel: compiled extension vs numpy
fallback, over a range of capture lengths.

Run from the repository root after installing the package:

    python3 benchmarks/bench_filter_bank.py
"""

import time

import numpy as np

from tiadc import _kernels_py

try:
    from tiadc import _kernels as _compiled
except ImportError:
    _compiled = None


def best_of(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    m_ch, n_taps, offset = 4, 65, 0
    rng = np.random.default_rng(1)
    taps = np.ascontiguousarray(rng.normal(size=(m_ch, n_taps)))

    print(f"M = {m_ch}, L = {n_taps} taps, best of 5 runs")
    print(f"{'samples':>10} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>8}")
    for n in (1 << 14, 1 << 16, 1 << 18, 1 << 20):
        x = np.ascontiguousarray(rng.normal(size=n))
        t_np = best_of(lambda: _kernels_py.filter_bank_apply(x, taps, m_ch, offset))
        if _compiled is not None:
            t_cy = best_of(lambda: _compiled.filter_bank_apply(x, taps, m_ch, offset))
            y_np = _kernels_py.filter_bank_apply(x, taps, m_ch, offset)
            y_cy = _compiled.filter_bank_apply(x, taps, m_ch, offset)
            err = np.max(np.abs(y_np - y_cy))
            assert err <= 1e-12, f"backends disagree by {err}"
            print(f"{n:>10} {t_np * 1e3:>12.2f} {t_cy * 1e3:>14.2f} "
                  f"{t_np / t_cy:>7.1f}x")
        else:
            print(f"{n:>10} {t_np * 1e3:>12.2f} {'not built':>14} {'-':>8}")
    if _compiled is None:
        print("compiled extension not available; install with Cython to compare")


if __name__ == "__main__":
    main()
