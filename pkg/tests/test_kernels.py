"""The numba kernels must agree with their pure-numpy twins."""

import importlib

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rapsmr import _kernels_numpy as knp

knb = pytest.importorskip("rapsmr._kernels_numba")


@pytest.fixture(scope="module")
def arrays():
    rng = np.random.default_rng(123)
    p = 300
    return dict(
        gamma_hat=rng.normal(0, 0.03, p),
        sigma_x=rng.uniform(0.004, 0.01, p),
        Gamma_hat=rng.normal(0, 0.03, p),
        sigma_y=rng.uniform(0.008, 0.02, p),
    )


@pytest.mark.parametrize("p1,v1,v2", [(0.92, 0.22, 12.1), (0.0, 0.0, 1e8),
                                      (1.0, 0.5, 0.5), (0.6, 0.0, 4.0)])
def test_posterior_stats_agree(arrays, p1, v1, v2):
    z = arrays["gamma_hat"] / arrays["sigma_x"]
    obs = np.full_like(z, 0.9)
    for a, b in zip(knp.posterior_stats_z(z, obs, p1, v1, v2),
                    knb.posterior_stats_z(z, obs, p1, v1, v2)):
        assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("beta,tau_sq", [(0.0, 0.0), (0.2, 3.8e-5), (-1.3, 1e-4)])
@pytest.mark.parametrize("prior", [(-1.0, 0.0, 0.0), (0.92, 0.22, 12.1)])
def test_weights_and_estimating_functions_agree(arrays, beta, tau_sq, prior):
    p1, v1, v2 = prior
    a = knp.snp_weights(beta, tau_sq, arrays["gamma_hat"], arrays["sigma_x"],
                        arrays["Gamma_hat"], arrays["sigma_y"], p1, v1, v2)
    b = knb.snp_weights(beta, tau_sq, arrays["gamma_hat"], arrays["sigma_x"],
                        arrays["Gamma_hat"], arrays["sigma_y"], p1, v1, v2)
    assert_allclose(a, b, rtol=1e-12)

    for psi_kind, k, delta in ((0, np.inf, 1.0), (1, 1.345, 0.8248033)):
        ca = knp.estimating_functions(beta, tau_sq, arrays["gamma_hat"],
                                      arrays["sigma_x"], arrays["Gamma_hat"],
                                      arrays["sigma_y"], p1, v1, v2,
                                      psi_kind, k, delta)
        cb = knb.estimating_functions(beta, tau_sq, arrays["gamma_hat"],
                                      arrays["sigma_x"], arrays["Gamma_hat"],
                                      arrays["sigma_y"], p1, v1, v2,
                                      psi_kind, k, delta)
        assert_allclose(ca, cb, rtol=1e-9, atol=1e-9)


def test_residuals_and_profile_agree(arrays):
    ta, sa = knp.residual_terms(0.4, 2e-5, arrays["gamma_hat"], arrays["sigma_x"],
                                arrays["Gamma_hat"], arrays["sigma_y"])
    tb, sb = knb.residual_terms(0.4, 2e-5, arrays["gamma_hat"], arrays["sigma_x"],
                                arrays["Gamma_hat"], arrays["sigma_y"])
    assert_allclose(ta, tb, rtol=1e-13)
    assert_allclose(sa, sb, rtol=1e-13)
    fa = knp.profile_neg_loglik(0.4, arrays["gamma_hat"], arrays["sigma_x"],
                                arrays["Gamma_hat"], arrays["sigma_y"])
    fb = knb.profile_neg_loglik(0.4, arrays["gamma_hat"], arrays["sigma_x"],
                                arrays["Gamma_hat"], arrays["sigma_y"])
    assert_allclose(fa, fb, rtol=1e-12)


def test_em_agree():
    rng = np.random.default_rng(7)
    z = np.where(rng.random(500) < 0.9, rng.normal(0, 1.1, 500), rng.normal(0, 3.5, 500))
    hist_a = np.empty(200)
    hist_b = np.empty(200)
    out_a = knp.em_fit_mixture(z, 0.9, 1.2, 9.0, 200, 1e-8, hist_a)
    out_b = knb.em_fit_mixture(z, 0.9, 1.2, 9.0, 200, 1e-8, hist_b)
    assert out_a[3] == out_b[3] and out_a[4] == out_b[4]
    assert_allclose(out_a[:3], out_b[:3], rtol=1e-9)
    n = out_a[3]
    assert_allclose(hist_a[:n], hist_b[:n], rtol=1e-10)


def test_backend_env_flag(monkeypatch):
    import rapsmr.backend as bk

    monkeypatch.setenv("RAPS_NUMBA", "0")
    mod = importlib.reload(bk)
    assert mod.BACKEND == "numpy"
    monkeypatch.setenv("RAPS_NUMBA", "auto")
    mod = importlib.reload(bk)
    assert mod.BACKEND in ("numba", "numpy")
    monkeypatch.delenv("RAPS_NUMBA", raising=False)
    importlib.reload(bk)
