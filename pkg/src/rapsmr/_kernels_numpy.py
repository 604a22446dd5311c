"""Pure-numpy implementations of the numeric inner loops.

Every function here has a numba twin in ``_kernels_numba`` with an identical
signature; ``backend`` picks one of the two at import time.  Arguments are
plain float64 scalars/arrays so both backends stay interchangeable.

Conventions shared by both backends:
  * ``v1``, ``v2`` are the prior component variances on the z-score scale
    (exposure effect divided by its standard error), zero prior means.
  * ``psi_kind`` is 0 for the identity score and 1 for Huber clipping at ``k``.
  * A negative ``p1`` in the weight kernels selects plain MLE weights
    (no shrinkage), so the hot loop needs no branching on a prior object.
"""

import numpy as np

LOG_2PI = 1.8378770664093453


def posterior_stats_z(z, obs_var, p1, v1, v2):
    """Posterior mean, variance and spike probability for z-scale effects.

    ``z ~ N(g, obs_var)`` with ``g ~ p1 N(0, v1) + (1-p1) N(0, v2)``.
    Returns three arrays aligned with ``z``.
    """
    z = np.asarray(z, dtype=np.float64)
    obs_var = np.broadcast_to(np.asarray(obs_var, dtype=np.float64), z.shape)
    shrink1 = v1 / (obs_var + v1)
    shrink2 = v2 / (obs_var + v2)
    m1 = z * shrink1
    m2 = z * shrink2
    pv1 = obs_var * shrink1
    pv2 = obs_var * shrink2
    if p1 <= 0.0:
        resp = np.zeros_like(z)
    elif p1 >= 1.0:
        resp = np.ones_like(z)
    else:
        # log-density difference (slab minus spike) of the marginal components
        d = (np.log1p(-p1) - np.log(p1)
             + 0.5 * np.log((obs_var + v1) / (obs_var + v2))
             + 0.5 * z * z * (1.0 / (obs_var + v1) - 1.0 / (obs_var + v2)))
        resp = 1.0 / (1.0 + np.exp(np.minimum(d, 700.0)))
    mean = resp * m1 + (1.0 - resp) * m2
    var = resp * (pv1 + m1 * m1) + (1.0 - resp) * (pv2 + m2 * m2) - mean * mean
    return mean, np.maximum(var, 0.0), resp


def snp_weights(beta, tau_sq, gamma_hat, sigma_x, Gamma_hat, sigma_y, p1, v1, v2):
    """Per-SNP instrument weights at (beta, tau_sq).

    Returns the weight vector: the empirical Bayes posterior mean of the
    exposure effect when ``p1 >= 0``, or the plain conditional MLE when
    ``p1 < 0``.
    """
    sx2 = sigma_x * sigma_x
    syt = sigma_y * sigma_y + tau_sq
    denom = 1.0 / sx2 + beta * beta / syt
    g_mle = (gamma_hat / sx2 + beta * Gamma_hat / syt) / denom
    if p1 < 0.0:
        return g_mle
    obs_var = 1.0 / (denom * sx2)
    mean, _, _ = posterior_stats_z(g_mle / sigma_x, obs_var, p1, v1, v2)
    return sigma_x * mean


def residual_terms(beta, tau_sq, gamma_hat, sigma_x, Gamma_hat, sigma_y):
    """Standardized residuals t_j and scales s_j at (beta, tau_sq)."""
    s = np.sqrt(beta * beta * sigma_x * sigma_x + sigma_y * sigma_y + tau_sq)
    t = (Gamma_hat - beta * gamma_hat) / s
    return t, s


def _psi1(t, psi_kind, k):
    if psi_kind == 0:
        return t
    return np.clip(t, -k, k)


def estimating_functions(beta, tau_sq, gamma_hat, sigma_x, Gamma_hat, sigma_y,
                         p1, v1, v2, psi_kind, k, delta):
    """The pair of estimating-equation values (C1, C2) at (beta, tau_sq)."""
    w = snp_weights(beta, tau_sq, gamma_hat, sigma_x, Gamma_hat, sigma_y, p1, v1, v2)
    t, s = residual_terms(beta, tau_sq, gamma_hat, sigma_x, Gamma_hat, sigma_y)
    p1t = _psi1(t, psi_kind, k)
    c1 = float(np.sum(w * p1t / s))
    c2 = float(np.sum((t * p1t - delta) / (s * s)))
    return c1, c2


def profile_neg_loglik(beta, gamma_hat, sigma_x, Gamma_hat, sigma_y):
    """Negative profile log-likelihood of beta (nuisance effects profiled out)."""
    r = Gamma_hat - beta * gamma_hat
    var = beta * beta * sigma_x * sigma_x + sigma_y * sigma_y
    return 0.5 * float(np.sum(r * r / var))


def em_fit_mixture(z, p1, v1, v2, max_iter, tol, loglik_hist):
    """EM for z ~ p1 N(0, v1) + (1-p1) N(0, v2), marginal variances >= 1.

    Updates in place nothing; returns (p1, v1, v2, n_iter, converged) and
    writes the per-iteration log-likelihood into ``loglik_hist`` (first
    ``n_iter`` entries valid).
    """
    z2 = z * z
    n = z.size
    prev = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ca = (np.log(p1) if p1 > 0.0 else -np.inf) - 0.5 * (LOG_2PI + np.log(v1))
        cb = (np.log1p(-p1) if p1 < 1.0 else -np.inf) - 0.5 * (LOG_2PI + np.log(v2))
        la = ca - z2 * (0.5 / v1)
        lb = cb - z2 * (0.5 / v2)
        m = np.maximum(la, lb)
        e = np.exp(-np.abs(la - lb))
        ll = float(np.sum(m + np.log1p(e)))
        loglik_hist[it - 1] = ll
        if np.isfinite(prev) and abs(ll - prev) < tol:
            converged = True
            break
        prev = ll
        r = np.where(la >= lb, 1.0 / (1.0 + e), e / (1.0 + e))
        s1 = float(np.sum(r))
        p1 = s1 / n
        if s1 > 0.0:
            v1 = max(float(np.sum(r * z2)) / s1, 1.0)
        if n - s1 > 0.0:
            v2 = max(float(np.sum((1.0 - r) * z2)) / (n - s1), 1.0)
    return p1, v1, v2, it, converged
