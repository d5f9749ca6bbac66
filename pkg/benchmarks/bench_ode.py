#!/usr/bin/env python3
"""Benchmark the profile-curve RK45 kernel: numba JIT vs pure-Python fallback.

The workload mirrors the shooting solver: repeated single-period
integrations at tight tolerance across a sweep of conserved values, plus one
long trajectory.  Run with SHRINKERLAB_NO_NUMBA=1 to confirm the package
itself falls back cleanly; this script always times both paths in-process.
"""

import math
import time

import numpy as np

from shrinkerlab import accel
from shrinkerlab.profile_curves import _outer_radius, e_max


def workload(kernel, n=2, sweeps=24):
    total_steps = 0
    for frac in np.linspace(0.05, 0.95, sweeps):
        E = frac * e_max(n)
        r_hi = _outer_radius(E, n)
        status, s, y, f = accel.run_rk45(r_hi, math.pi / 2, 0.0, n, 12.0,
                                         kernel=kernel)
        total_steps += len(s)
    status, s, y, f = accel.run_rk45(_outer_radius(0.6 * e_max(n), n),
                                     math.pi / 2, 0.0, n, 200.0, kernel=kernel)
    total_steps += len(s)
    return total_steps


def time_kernel(label, kernel, repeats=3):
    workload(kernel)  # warm-up (and JIT compilation)
    best = math.inf
    steps = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        steps = workload(kernel)
        best = min(best, time.perf_counter() - t0)
    print(f"{label:>16s}: {best * 1e3:9.2f} ms  ({steps} accepted steps)")
    return best


def main():
    print(f"numba available: {accel.NUMBA_AVAILABLE}, "
          f"in use by package: {accel.USE_NUMBA}")
    t_py = time_kernel("pure python", accel._rk45_profile_impl)
    if accel.NUMBA_AVAILABLE:
        import numba

        jitted = accel.rk45_profile if accel.USE_NUMBA else \
            numba.njit(cache=True)(accel._rk45_profile_impl)
        t_nb = time_kernel("numba njit", jitted)
        print(f"{'speedup':>16s}: {t_py / t_nb:9.1f} x")

        a = accel.run_rk45(3.0, math.pi / 2, 0.0, 2.0, 40.0,
                           kernel=accel._rk45_profile_impl)
        b = accel.run_rk45(3.0, math.pi / 2, 0.0, 2.0, 40.0, kernel=jitted)
        same = all(np.array_equal(x, y) for x, y in zip(a[1:], b[1:]))
        print(f"{'trajectories':>16s}: {'bit-identical' if same else 'DIFFER'}")


if __name__ == "__main__":
    main()
