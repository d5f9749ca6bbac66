import math
import os
import subprocess
import sys

import numpy as np

from shrinkerlab import accel


def test_fallback_matches_jit_bitwise():
    args = (3.0, math.pi / 2, 0.0, 2.0, 40.0)
    st_a, s_a, y_a, f_a = accel.run_rk45(*args,
                                         kernel=accel._rk45_profile_impl)
    st_b, s_b, y_b, f_b = accel.run_rk45(*args)
    assert st_a == st_b
    assert np.array_equal(s_a, s_b)
    assert np.array_equal(y_a, y_b)
    assert np.array_equal(f_a, f_b)


def test_radius_floor_status():
    # driving delta toward 0 with tiny E sends r through the floor quickly
    status, s, y, f = accel.run_rk45(0.5, 3.1, 0.0, 2.0, 10.0, r_min=0.4)
    assert status == accel.STATUS_RADIUS


def test_env_flag_disables_numba():
    code = ("from shrinkerlab import accel; "
            "print(accel.USE_NUMBA, accel.rk45_profile is accel._rk45_profile_impl)")
    env = dict(os.environ, SHRINKERLAB_NO_NUMBA="1")
    proc = subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True)
    assert proc.stdout.split() == ["False", "True"]


def test_storage_grows_when_needed():
    # force a tiny initial estimate by integrating far with a small max_step
    status, s, y, f = accel.run_rk45(2.5, math.pi / 2, 0.0, 2.0, 30.0,
                                     max_step=0.005)
    assert status == accel.STATUS_OK
    assert abs(s[-1] - 30.0) < 1e-12
