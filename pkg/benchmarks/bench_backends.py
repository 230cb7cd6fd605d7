"""Benchmark the numba kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_backends.py [--quick]

Both backends produce bit-identical hit counts and byte-equal covariance
sums; this script only measures throughput.
"""

import argparse
import time

import numpy as np

from shrinktarget import _kernels_numba as kb
from shrinktarget import _kernels_numpy as kn
from shrinktarget import dynamics, targets


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_bit_orbit(M, n):
    m = dynamics.doubling_map()
    sch = targets.build_schedule(m, p=targets.GENERIC_CENTER, gamma=1.0,
                                 C=1.0, n_max=n)
    cps = np.array([n], dtype=np.int64)
    args = (7, M, n, sch.scaled_lo, sch.scaled_width, cps)
    Sa = kb.bit_orbit_hits(*args)  # also warms the JIT
    Sb = kn.bit_orbit_hits(*args)
    assert np.array_equal(Sa, Sb)
    ta = _time(lambda: kb.bit_orbit_hits(*args))
    tb = _time(lambda: kn.bit_orbit_hits(*args))
    steps = M * n
    print(f"bit_orbit_hits   M={M} n={n}: numba {ta:.3f}s "
          f"({steps / ta / 1e6:.0f} Msteps/s)  numpy {tb:.3f}s "
          f"({steps / tb / 1e6:.0f} Msteps/s)  speedup {tb / ta:.1f}x")


def bench_cross_sums(n):
    m = dynamics.doubling_map()
    sch = targets.build_schedule(m, p=targets.GENERIC_CENTER, gamma=1.0,
                                 C=1.0, n_max=n)
    a = sch.scaled_lo.astype(np.float64) * 2.0 ** -60
    alpha = sch.mu
    ca = kb.cross_sums(a, alpha, 60)
    cb = kn.cross_sums(a, alpha, 60)
    assert np.array_equal(ca, cb)
    ta = _time(lambda: kb.cross_sums(a, alpha, 60))
    tb = _time(lambda: kn.cross_sums(a, alpha, 60))
    print(f"cross_sums       n={n}: numba {ta:.3f}s  numpy {tb:.3f}s  "
          f"speedup {tb / ta:.1f}x")


def bench_float_orbit(M, n):
    m = dynamics.markov_linear_map()
    sch = targets.build_schedule(m, p=0.4, gamma=1.0, C=1.0, n_max=n)
    starts = dynamics.sample_initial(m, 3, M)
    br = np.asarray(m.branches, dtype=np.float64)
    cps = np.array([n], dtype=np.int64)
    args = (starts, br[:, 0], br[:, 1], br[:, 2], br[:, 3], False, 0.4,
            sch.r, n, cps)
    Sa = kb.float_orbit_hits(*args)
    Sb = kn.float_orbit_hits(*args)
    assert np.array_equal(Sa, Sb)
    ta = _time(lambda: kb.float_orbit_hits(*args))
    tb = _time(lambda: kn.float_orbit_hits(*args))
    print(f"float_orbit_hits M={M} n={n}: numba {ta:.3f}s  numpy {tb:.3f}s  "
          f"speedup {tb / ta:.1f}x")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="smaller sizes (CI-friendly)")
    args = ap.parse_args()
    if args.quick:
        bench_bit_orbit(200, 10 ** 4)
        bench_cross_sums(10 ** 4)
        bench_float_orbit(200, 10 ** 3)
    else:
        bench_bit_orbit(1000, 10 ** 5)
        bench_cross_sums(10 ** 6)
        bench_float_orbit(1000, 10 ** 4)


if __name__ == "__main__":
    main()
