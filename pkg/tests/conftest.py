"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from rapsmr.gwas_io import SummarySet


def quad_posterior_oracle(Z, s2, p1, v1, v2, mu1=0.0, mu2=0.0):
    """Posterior mean/variance by adaptive quadrature (point masses split off).

    Independent of the package's closed-form path; used to pin its outputs.
    """
    def prior_density(g):
        a = p1 * norm.pdf(g, mu1, np.sqrt(v1)) if v1 > 0 else 0.0
        b = (1 - p1) * norm.pdf(g, mu2, np.sqrt(v2)) if v2 > 0 else 0.0
        return a + b

    def integrand(g, power):
        return g ** power * prior_density(g) * norm.pdf(Z, g, np.sqrt(s2))

    lim = 60 * max(np.sqrt(max(v1, v2, s2)), 1.0)
    kw = dict(limit=400, epsabs=1e-14, epsrel=1e-13, points=[Z, mu1, mu2])
    m0 = quad(integrand, -lim, lim, args=(0,), **kw)[0]
    m1 = quad(integrand, -lim, lim, args=(1,), **kw)[0]
    m2 = quad(integrand, -lim, lim, args=(2,), **kw)[0]
    if v1 == 0:
        w = p1 * norm.pdf(Z, mu1, np.sqrt(s2))
        m0 += w
        m1 += w * mu1
        m2 += w * mu1 ** 2
    if v2 == 0:
        w = (1 - p1) * norm.pdf(Z, mu2, np.sqrt(s2))
        m0 += w
        m1 += w * mu2
        m2 += w * mu2 ** 2
    mean = m1 / m0
    return mean, m2 / m0 - mean ** 2


def gh_expect_oracle(f, n=64):
    """E[f(Z)], Z ~ N(0,1), by n-node Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return float(np.sum(w * f(np.sqrt(2.0) * x)) / np.sqrt(np.pi))


def exact_linear_data(beta, p=40, seed=0, intercept=0.0):
    """Noise-free SummarySet with Gamma_hat = intercept + beta * gamma_hat."""
    rng = np.random.default_rng(seed)
    gamma_hat = rng.uniform(0.02, 0.08, p) * rng.choice([-1.0, 1.0], p)
    return SummarySet(
        snps=[f"rs{j}" for j in range(p)],
        gamma_hat=gamma_hat,
        sigma_x=np.full(p, 0.01),
        Gamma_hat=intercept + beta * gamma_hat,
        sigma_y=np.full(p, 0.015),
    )


def conflicted_dataset(amp, n_extra=8, seed=5):
    """Moderate instruments at slope 0.3 plus near-null-exposure SNPs whose
    outcome effects imply a larger slope; produces multiple finite roots for
    suitable amplification."""
    rng = np.random.default_rng(seed)
    n_main = 14
    p = n_main + n_extra
    sx = np.full(p, 0.02)
    sy = np.full(p, 0.02)
    gamma_main = rng.uniform(2.5, 4.0, n_main) * 0.02
    gamma_extra = rng.uniform(0.1, 0.5, n_extra) * 0.02
    G_main = 0.3 * gamma_main
    G_extra = amp * 0.02 * rng.uniform(2.0, 3.5, n_extra)
    gamma_hat = np.concatenate([gamma_main, gamma_extra]) + rng.normal(0, 1, p) * 0.02 * 0.5
    Gamma_hat = np.concatenate([G_main, G_extra]) + rng.normal(0, 1, p) * 0.02 * 0.5
    return SummarySet([f"rs{j}" for j in range(p)], gamma_hat, sx, Gamma_hat, sy)


@pytest.fixture
def ldl_prior_params():
    """Mixture parameters of the all-SNP lipid analysis used across tests."""
    return 0.92, 0.47, 3.48
