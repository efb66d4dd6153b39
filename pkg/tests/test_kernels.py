import os
import subprocess
import sys

import numpy as np
import pytest

from sasakian_mcp import _accel, kernels

needs_numba = pytest.mark.skipif(not _accel.USE_NUMBA, reason="numba path disabled")


def test_series_matches_closed_form_at_switch():
    # both branches agree where the evaluation switches from series to closed form
    for x in (-1.0, 1.0):
        lo = np.nextafter(x, 0.0)
        assert kernels.f1_numpy(np.array([lo]))[0] == pytest.approx(
            kernels.f1_numpy(np.array([x]))[0], rel=1e-13)
        assert kernels.f2_numpy(np.array([lo]))[0] == pytest.approx(
            kernels.f2_numpy(np.array([x]))[0], rel=1e-14)


def test_f1_f2_values_at_zero():
    assert kernels.f1_numpy(np.array([0.0]))[0] == 1.0 / 12.0
    assert kernels.f2_numpy(np.array([0.0]))[0] == 1.0


@needs_numba
def test_numba_numpy_parity(rng):
    x = np.concatenate([rng.uniform(-50, 50, 500), rng.uniform(-1.2, 1.2, 500)])
    np.testing.assert_allclose(kernels.f1_numba(x), kernels.f1_numpy(x), rtol=1e-13, atol=1e-300)
    np.testing.assert_allclose(kernels.f2_numba(x), kernels.f2_numpy(x), rtol=1e-13, atol=1e-15)
    k1 = rng.uniform(-10, 30, 300)
    k2 = rng.uniform(-10, 8, 300)
    t = rng.uniform(0, 1, 300)
    np.testing.assert_allclose(kernels.density_numba(k1, k2, t, 7),
                               kernels.density_numpy(k1, k2, t, 7), rtol=1e-12)


@needs_numba
def test_heisenberg_kernels_parity(rng):
    cov = rng.standard_normal((200, 5))
    cov[:, -1] *= 3.0
    cov[:5, -1] = [0.0, 1e-3, -0.05, 0.09, 0.11]
    np.testing.assert_allclose(kernels.heisenberg_endpoints_numba(cov),
                               kernels.heisenberg_endpoints_numpy(cov), rtol=1e-13, atol=1e-15)
    steps = np.full(5, 1e-5)
    np.testing.assert_allclose(kernels.heisenberg_jacobians_numba(cov, steps),
                               kernels.heisenberg_jacobians_numpy(cov, steps), rtol=1e-8)


def test_small_u_series_continuity():
    # the endpoint map switches to a series below |u| = 0.1
    base = np.array([[0.7, -0.3, 0.1]])
    lo = base.copy()
    hi = base.copy()
    lo[0, -1] = np.nextafter(0.1, 0.0)
    hi[0, -1] = 0.1
    np.testing.assert_allclose(kernels.heisenberg_endpoints_numpy(lo),
                               kernels.heisenberg_endpoints_numpy(hi), rtol=1e-12)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, SASAKIAN_MCP_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c",
                          "from sasakian_mcp import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
