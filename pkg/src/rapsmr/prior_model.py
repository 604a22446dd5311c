"""Spike-and-slab prior on standardized exposure effects.

The prior is a two-component zero-mean Gaussian mixture on the z-score scale
(exposure effect divided by its standard error).  It is fitted once to the
observed z-scores by maximum likelihood of the marginal mixture (component
variances inflated by one unit of sampling noise) and then held fixed while
the causal-effect equations are solved.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels as K


@dataclass(frozen=True)
class SpikeSlabPrior:
    """Mixture weight and component variances, ordered sigma1_sq <= sigma2_sq."""

    p1: float
    sigma1_sq: float
    sigma2_sq: float

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise ValueError(f"p1 must be in [0, 1], got {self.p1}")
        if self.sigma1_sq < 0.0 or self.sigma2_sq < 0.0:
            raise ValueError("component variances must be non-negative")
        if self.sigma1_sq > self.sigma2_sq:
            raise ValueError("components must be ordered: sigma1_sq <= sigma2_sq")


#: Effectively unshrunk weights; used when a prior is needed only formally.
FLAT_PRIOR = SpikeSlabPrior(p1=0.0, sigma1_sq=0.0, sigma2_sq=1e8)


@dataclass(frozen=True)
class PosteriorMoments:
    mean: float
    variance: float
    spike_resp: float


@dataclass
class PriorFit:
    prior: SpikeSlabPrior
    loglik: float
    converged: bool
    n_iter: int

    def to_text(self):
        return (
            f"p1\t{self.prior.p1:.10g}\n"
            f"sigma1\t{np.sqrt(self.prior.sigma1_sq):.10g}\n"
            f"sigma2\t{np.sqrt(self.prior.sigma2_sq):.10g}\n"
            f"loglik\t{self.loglik:.10g}\n"
            f"converged\t{str(self.converged).lower()}\n"
        )


def _em_run(z, p1, v1, v2, max_iter, tol):
    hist = np.empty(max_iter)
    p1, v1, v2, n_iter, converged = K.em_fit_mixture(
        z, float(p1), float(v1), float(v2), int(max_iter), float(tol), hist
    )
    return p1, v1, v2, hist[n_iter - 1], n_iter, converged


def fit_prior(z_scores, max_iter=1000, tol=1e-8, n_restarts=10):
    """Maximum-likelihood spike-and-slab fit to exposure z-scores.

    Runs EM from a moment-based initialization plus ``n_restarts`` seeded
    random restarts and keeps the best likelihood.  Marginal component
    variances are floored at 1 (pure sampling noise), so the deconvolved
    component variances stay non-negative.  Non-convergence is reported via
    the ``converged`` flag on the best run, not raised.
    """
    z = np.ascontiguousarray(z_scores, dtype=np.float64)
    if z.ndim != 1 or z.size < 3:
        raise ValueError("need at least 3 z-scores to fit the prior")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if np.ptp(z) == 0.0:
        raise ValueError("degenerate input: all z-scores are equal")

    med_z2 = float(np.median(z * z))
    var_z = float(np.var(z))
    starts = [(0.9, max(0.25 * med_z2, 0.0) + 1.0, max(2.0 * (var_z - 1.0), 1.0) + 1.0)]
    rng = np.random.default_rng(0)  # fixed: fit_prior is deterministic in z
    slab0 = max(var_z - 1.0, 1.0)
    for _ in range(n_restarts):
        starts.append((
            rng.uniform(0.5, 0.99),
            1.0 + rng.uniform(0.0, med_z2),
            1.0 + slab0 * rng.uniform(1.0, 4.0),
        ))

    best = None
    for p1_0, v1_0, v2_0 in starts:
        p1, v1, v2, ll, n_iter, converged = _em_run(z, p1_0, v1_0, v2_0, max_iter, tol)
        if best is None or ll > best[3]:
            best = (p1, v1, v2, ll, n_iter, converged)

    p1, v1, v2, ll, n_iter, converged = best
    s1sq, s2sq = v1 - 1.0, v2 - 1.0
    if s1sq > s2sq:
        s1sq, s2sq = s2sq, s1sq
        p1 = 1.0 - p1
    prior = SpikeSlabPrior(p1=p1, sigma1_sq=max(s1sq, 0.0), sigma2_sq=max(s2sq, 0.0))
    return PriorFit(prior=prior, loglik=ll, converged=converged, n_iter=n_iter)


def posterior_moments(Z, obs_var, prior, prior_means=(0.0, 0.0)):
    """Moments of the effect given one observation ``Z ~ N(effect, obs_var)``.

    The posterior is again a two-component Gaussian mixture; a zero component
    variance degenerates to a point mass at that component's prior mean.
    """
    if obs_var <= 0:
        raise ValueError("obs_var must be positive")
    mu1, mu2 = prior_means
    if mu1 == 0.0 and mu2 == 0.0:
        mean, var, resp = K.posterior_stats_z(
            np.array([float(Z)]), np.array([float(obs_var)]),
            prior.p1, prior.sigma1_sq, prior.sigma2_sq,
        )
        return PosteriorMoments(float(mean[0]), float(var[0]), float(resp[0]))

    def component(mu, vk):
        if vk == 0.0:
            return mu, 0.0
        prec = 1.0 / obs_var + 1.0 / vk
        return (Z / obs_var + mu / vk) / prec, 1.0 / prec

    def log_marginal(mu, vk):
        v = obs_var + vk
        return -0.5 * (np.log(2.0 * np.pi * v) + (Z - mu) ** 2 / v)

    m1, pv1 = component(mu1, prior.sigma1_sq)
    m2, pv2 = component(mu2, prior.sigma2_sq)
    if prior.p1 <= 0.0:
        resp = 0.0
    elif prior.p1 >= 1.0:
        resp = 1.0
    else:
        d = (np.log(prior.p1) + log_marginal(mu1, prior.sigma1_sq)
             - np.log1p(-prior.p1) - log_marginal(mu2, prior.sigma2_sq))
        resp = 1.0 / (1.0 + np.exp(-d))
    mean = resp * m1 + (1.0 - resp) * m2
    var = resp * (pv1 + m1 ** 2) + (1.0 - resp) * (pv2 + m2 ** 2) - mean ** 2
    return PosteriorMoments(float(mean), float(max(var, 0.0)), float(resp))


def eb_weight(beta, tau_sq, snp, prior):
    """Shrunken instrument-strength weight for one SNP at (beta, tau_sq).

    ``snp`` is the tuple (gamma_hat, sigma_x, Gamma_hat, sigma_y).  The
    conditional MLE of the exposure effect is shrunk through the prior on the
    z-score scale and mapped back to the effect scale.
    """
    gamma_hat, sigma_x, Gamma_hat, sigma_y = snp
    if sigma_x <= 0 or sigma_y <= 0:
        raise ValueError("standard errors must be positive")
    if tau_sq < 0:
        raise ValueError("tau_sq must be non-negative")
    w = K.snp_weights(
        float(beta), float(tau_sq),
        np.array([float(gamma_hat)]), np.array([float(sigma_x)]),
        np.array([float(Gamma_hat)]), np.array([float(sigma_y)]),
        prior.p1, prior.sigma1_sq, prior.sigma2_sq,
    )
    return float(w[0])


def mle_weight(beta, tau_sq, snp):
    """Conditional MLE of the exposure effect at (beta, tau_sq) for one SNP."""
    gamma_hat, sigma_x, Gamma_hat, sigma_y = snp
    w = K.snp_weights(
        float(beta), float(tau_sq),
        np.array([float(gamma_hat)]), np.array([float(sigma_x)]),
        np.array([float(Gamma_hat)]), np.array([float(sigma_y)]),
        -1.0, 0.0, 0.0,
    )
    return float(w[0])
