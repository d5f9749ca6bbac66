"""Hot numeric kernels, JIT-compiled with numba when available.

The profile-curve integrator below is the innermost loop of the shooting
solver and dominates runtime at tight tolerances.  It is written as plain
scalar Python so the same source compiles under ``numba.njit`` and also runs
unmodified as a pure-Python/NumPy fallback.  Set ``SHRINKERLAB_NO_NUMBA=1``
to force the fallback path; ``benchmarks/bench_ode.py`` compares the two.
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_FLAG = "SHRINKERLAB_NO_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(_ENV_FLAG, "") in ("", "0")


NUMBA_AVAILABLE = False
if numba_requested():
    try:
        import numba

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and numba_requested()


def _maybe_jit(fn):
    if USE_NUMBA:
        return numba.njit(cache=True, fastmath=False)(fn)
    return fn


# Status codes returned by the integrator.
STATUS_OK = 0
STATUS_RADIUS = 1
STATUS_MAXSTEPS = 2


def _rk45_profile_impl(r0, d0, p0, n, s_end, rtol, atol, max_step, r_min,
                       max_steps, s_out, y_out, f_out):
    """Dormand-Prince 5(4) integration of the profile-curve system.

    State is (r, delta, phi) with delta the angle between tangent and the
    radial direction's polar angle:

        r'     = cos(delta)
        delta' = (r/2 - n/r) sin(delta)
        phi'   = sin(delta) / r

    Accepted steps are appended to ``s_out``/``y_out``/``f_out`` (slope
    storage enables cubic Hermite dense output).  Returns (status, count).
    """
    # Dormand-Prince tableau.
    a21 = 1.0 / 5.0
    a31, a32 = 3.0 / 40.0, 9.0 / 40.0
    a41, a42, a43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
    a51, a52, a53, a54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                          64448.0 / 6561.0, -212.0 / 729.0)
    a61, a62, a63, a64, a65 = (9017.0 / 3168.0, -355.0 / 33.0,
                               46732.0 / 5247.0, 49.0 / 176.0,
                               -5103.0 / 18656.0)
    b1, b3, b4, b5, b6 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                          -2187.0 / 6784.0, 11.0 / 84.0)
    # Error coefficients: 5th-order solution minus embedded 4th-order.
    e1, e3, e4, e5, e6, e7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                              -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

    s = 0.0
    r, d, p = r0, d0, p0
    kr1 = math.cos(d)
    kd1 = (0.5 * r - n / r) * math.sin(d)
    kp1 = math.sin(d) / r

    count = 0
    s_out[count] = s
    y_out[count, 0] = r
    y_out[count, 1] = d
    y_out[count, 2] = p
    f_out[count, 0] = kr1
    f_out[count, 1] = kd1
    f_out[count, 2] = kp1

    direction = 1.0 if s_end >= 0.0 else -1.0
    h = direction * min(max_step, 1e-3)
    status = STATUS_OK

    while direction * (s_end - s) > 1e-14 * abs(s_end):
        if count >= max_steps:
            status = STATUS_MAXSTEPS
            break
        if direction * (s + h - s_end) > 0.0:
            h = s_end - s

        r2 = r + h * a21 * kr1
        d2 = d + h * a21 * kd1
        if r2 <= r_min:
            status = STATUS_RADIUS
            break
        kr2 = math.cos(d2)
        kd2 = (0.5 * r2 - n / r2) * math.sin(d2)
        kp2 = math.sin(d2) / r2

        r3 = r + h * (a31 * kr1 + a32 * kr2)
        d3 = d + h * (a31 * kd1 + a32 * kd2)
        if r3 <= r_min:
            status = STATUS_RADIUS
            break
        kr3 = math.cos(d3)
        kd3 = (0.5 * r3 - n / r3) * math.sin(d3)
        kp3 = math.sin(d3) / r3

        r4 = r + h * (a41 * kr1 + a42 * kr2 + a43 * kr3)
        d4 = d + h * (a41 * kd1 + a42 * kd2 + a43 * kd3)
        if r4 <= r_min:
            status = STATUS_RADIUS
            break
        kr4 = math.cos(d4)
        kd4 = (0.5 * r4 - n / r4) * math.sin(d4)
        kp4 = math.sin(d4) / r4

        r5 = r + h * (a51 * kr1 + a52 * kr2 + a53 * kr3 + a54 * kr4)
        d5 = d + h * (a51 * kd1 + a52 * kd2 + a53 * kd3 + a54 * kd4)
        if r5 <= r_min:
            status = STATUS_RADIUS
            break
        kr5 = math.cos(d5)
        kd5 = (0.5 * r5 - n / r5) * math.sin(d5)
        kp5 = math.sin(d5) / r5

        r6 = r + h * (a61 * kr1 + a62 * kr2 + a63 * kr3 + a64 * kr4 + a65 * kr5)
        d6 = d + h * (a61 * kd1 + a62 * kd2 + a63 * kd3 + a64 * kd4 + a65 * kd5)
        if r6 <= r_min:
            status = STATUS_RADIUS
            break
        kr6 = math.cos(d6)
        kd6 = (0.5 * r6 - n / r6) * math.sin(d6)
        kp6 = math.sin(d6) / r6

        rn = r + h * (b1 * kr1 + b3 * kr3 + b4 * kr4 + b5 * kr5 + b6 * kr6)
        dn = d + h * (b1 * kd1 + b3 * kd3 + b4 * kd4 + b5 * kd5 + b6 * kd6)
        pn = p + h * (b1 * kp1 + b3 * kp3 + b4 * kp4 + b5 * kp5 + b6 * kp6)
        if rn <= r_min:
            status = STATUS_RADIUS
            break
        kr7 = math.cos(dn)
        kd7 = (0.5 * rn - n / rn) * math.sin(dn)
        kp7 = math.sin(dn) / rn

        er = h * (e1 * kr1 + e3 * kr3 + e4 * kr4 + e5 * kr5 + e6 * kr6 + e7 * kr7)
        ed = h * (e1 * kd1 + e3 * kd3 + e4 * kd4 + e5 * kd5 + e6 * kd6 + e7 * kd7)
        ep = h * (e1 * kp1 + e3 * kp3 + e4 * kp4 + e5 * kp5 + e6 * kp6 + e7 * kp7)

        sr = atol + rtol * max(abs(r), abs(rn))
        sd = atol + rtol * max(abs(d), abs(dn))
        sp = atol + rtol * max(abs(p), abs(pn))
        err = math.sqrt(((er / sr) ** 2 + (ed / sd) ** 2 + (ep / sp) ** 2) / 3.0)

        if err <= 1.0:
            s = s + h
            r, d, p = rn, dn, pn
            kr1, kd1, kp1 = kr7, kd7, kp7  # FSAL
            count += 1
            s_out[count] = s
            y_out[count, 0] = r
            y_out[count, 1] = d
            y_out[count, 2] = p
            f_out[count, 0] = kr1
            f_out[count, 1] = kd1
            f_out[count, 2] = kp1

        if err == 0.0:
            factor = 5.0
        else:
            factor = min(5.0, max(0.2, 0.9 * err ** -0.2))
        h = h * factor
        if abs(h) > max_step:
            h = direction * max_step
        if abs(h) < 1e-14:
            status = STATUS_MAXSTEPS
            break

    return status, count


rk45_profile = _maybe_jit(_rk45_profile_impl)


def run_rk45(r0, d0, p0, n, s_end, rtol=1e-12, atol=1e-12, max_step=0.02,
             r_min=1e-6, max_steps=4_000_000, kernel=None):
    """Allocate output storage and run the RK45 kernel.

    Returns (status, s, y, f) with s shaped (count+1,), y and f (count+1, 3).
    """
    if kernel is None:
        kernel = rk45_profile
    est = int(abs(s_end) / max_step * 4) + 64
    est = min(est, max_steps)
    while True:
        s_out = np.empty(est + 1)
        y_out = np.empty((est + 1, 3))
        f_out = np.empty((est + 1, 3))
        status, count = kernel(float(r0), float(d0), float(p0), float(n),
                               float(s_end), float(rtol), float(atol),
                               float(max_step), float(r_min), est,
                               s_out, y_out, f_out)
        if status == STATUS_MAXSTEPS and est < max_steps:
            est = min(est * 4, max_steps)
            continue
        return status, s_out[:count + 1], y_out[:count + 1], f_out[:count + 1]
