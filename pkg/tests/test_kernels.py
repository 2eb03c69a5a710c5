"""The compiled kernels and their pure-Python twins must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from tailmst import _pykernels, kernels
from tailmst.margins import ArmaGarchParams, _density_constants

ck = pytest.importorskip("tailmst._ckernels", reason="compiled extension not built")


@pytest.fixture
def series(rng):
    return rng.standard_t(6, size=400) * 0.02


def test_garch_filter(series):
    args = (series, 0.001, 0.3, -0.1, 2e-5, 0.08, 0.9, 4e-4, 0.0)
    for a, b in zip(ck.garch_filter(*args), _pykernels.garch_filter(*args)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=0)


@pytest.mark.parametrize("h1_uncond", [1, 0])
def test_garch_loglik_grad(series, h1_uncond):
    p = ArmaGarchParams(0.001, 0.3, -0.1, 2e-5, 0.08, 0.9, 6.0, 0.9)
    theta = np.array([p.mu0, p.ar, p.ma, p.omega, p.alpha, p.beta])
    dens = _density_constants(p.nu, p.xi)
    a = ck.garch_loglik_grad(series, theta, dens, h1_uncond, 4e-4, 0.0005)
    b = _pykernels.garch_loglik_grad(series, theta, dens, h1_uncond, 4e-4, 0.0005)
    assert a[0] == pytest.approx(b[0], rel=1e-13)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-10)


def test_dcc_kernels(rng):
    z = rng.standard_normal((300, 2))
    x = z * 1.1
    z1, z2, x1, x2 = (np.ascontiguousarray(v) for v in (z[:, 0], z[:, 1], x[:, 0], x[:, 1]))
    np.testing.assert_allclose(ck.dcc_rho(z1, z2, 0.3, 0.05, 0.9),
                               _pykernels.dcc_rho(z1, z2, 0.3, 0.05, 0.9), rtol=1e-14)
    args = (x1, x2, z1, z2, 0.3, 0.05, 0.9, 7.0, 0.1)
    assert ck.tcopula_dcc_loglik(*args) == pytest.approx(_pykernels.tcopula_dcc_loglik(*args),
                                                         rel=1e-13)
    np.testing.assert_allclose(ck.tcopula_dcc_loglik_grad(*args),
                               _pykernels.tcopula_dcc_loglik_grad(*args), rtol=1e-11)


def test_copula_gradient_matches_finite_differences(rng):
    z = rng.standard_normal((500, 2))
    z1, z2 = np.ascontiguousarray(z[:, 0]), np.ascontiguousarray(z[:, 1])
    c, d, h = 0.06, 0.88, 1e-6
    _, gc, gd = kernels.tcopula_dcc_loglik_grad(z1, z2, z1, z2, 0.2, c, d, 6.0, 0.0)
    f = lambda c_, d_: kernels.tcopula_dcc_loglik(z1, z2, z1, z2, 0.2, c_, d_, 6.0, 0.0)
    assert gc == pytest.approx((f(c + h, d) - f(c - h, d)) / (2 * h), rel=1e-5)
    assert gd == pytest.approx((f(c, d + h) - f(c, d - h)) / (2 * h), rel=1e-5)


def test_backend_selection_env_var():
    code = "import tailmst.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, TAILMST_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in ("cython", "python")
