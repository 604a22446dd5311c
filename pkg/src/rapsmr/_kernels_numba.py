"""Numba-compiled twins of the ``_kernels_numpy`` functions.

Same signatures and semantics; loops are fused per SNP so the solver's hot
path does no array temporaries.  Numerical results agree with the numpy
backend to rounding (summation order differs), which the kernel tests pin.
"""

import math

import numpy as np
from numba import njit

LOG_2PI = 1.8378770664093453


@njit(cache=True, inline="always")
def _neg_logit(p1):
    # log((1-p1)/p1), the only prior constant the responsibilities need
    return math.log1p(-p1) - math.log(p1)


@njit(cache=True, inline="always")
def _post_mean_var_resp_scalar(z, obs_var, p1, v1, v2, neg_logit):
    shrink1 = v1 / (obs_var + v1)
    shrink2 = v2 / (obs_var + v2)
    m1 = z * shrink1
    m2 = z * shrink2
    pv1 = obs_var * shrink1
    pv2 = obs_var * shrink2
    if p1 <= 0.0:
        resp = 0.0
    elif p1 >= 1.0:
        resp = 1.0
    else:
        d = (neg_logit
             + 0.5 * math.log((obs_var + v1) / (obs_var + v2))
             + 0.5 * z * z * (1.0 / (obs_var + v1) - 1.0 / (obs_var + v2)))
        resp = 1.0 / (1.0 + math.exp(min(d, 700.0)))
    mean = resp * m1 + (1.0 - resp) * m2
    var = resp * (pv1 + m1 * m1) + (1.0 - resp) * (pv2 + m2 * m2) - mean * mean
    if var < 0.0:
        var = 0.0
    return mean, var, resp


@njit(cache=True)
def posterior_stats_z(z, obs_var, p1, v1, v2):
    n = z.size
    mean = np.empty(n)
    var = np.empty(n)
    resp = np.empty(n)
    nl = _neg_logit(p1) if 0.0 < p1 < 1.0 else 0.0
    for j in range(n):
        mean[j], var[j], resp[j] = _post_mean_var_resp_scalar(
            z[j], obs_var[j], p1, v1, v2, nl)
    return mean, var, resp


@njit(cache=True, inline="always")
def _weight_scalar(beta, tau_sq, gh, sx, Gh, sy, p1, v1, v2, neg_logit):
    sx2 = sx * sx
    syt = sy * sy + tau_sq
    denom = 1.0 / sx2 + beta * beta / syt
    g_mle = (gh / sx2 + beta * Gh / syt) / denom
    if p1 < 0.0:
        return g_mle
    obs_var = 1.0 / (denom * sx2)
    mean, _, _ = _post_mean_var_resp_scalar(g_mle / sx, obs_var, p1, v1, v2,
                                            neg_logit)
    return sx * mean


@njit(cache=True)
def snp_weights(beta, tau_sq, gamma_hat, sigma_x, Gamma_hat, sigma_y, p1, v1, v2):
    n = gamma_hat.size
    w = np.empty(n)
    nl = _neg_logit(p1) if 0.0 < p1 < 1.0 else 0.0
    for j in range(n):
        w[j] = _weight_scalar(beta, tau_sq, gamma_hat[j], sigma_x[j],
                              Gamma_hat[j], sigma_y[j], p1, v1, v2, nl)
    return w


@njit(cache=True)
def residual_terms(beta, tau_sq, gamma_hat, sigma_x, Gamma_hat, sigma_y):
    n = gamma_hat.size
    t = np.empty(n)
    s = np.empty(n)
    for j in range(n):
        sj = math.sqrt(beta * beta * sigma_x[j] * sigma_x[j]
                       + sigma_y[j] * sigma_y[j] + tau_sq)
        s[j] = sj
        t[j] = (Gamma_hat[j] - beta * gamma_hat[j]) / sj
    return t, s


@njit(cache=True)
def estimating_functions(beta, tau_sq, gamma_hat, sigma_x, Gamma_hat, sigma_y,
                         p1, v1, v2, psi_kind, k, delta):
    n = gamma_hat.size
    c1 = 0.0
    c2 = 0.0
    nl = _neg_logit(p1) if 0.0 < p1 < 1.0 else 0.0
    for j in range(n):
        sj = math.sqrt(beta * beta * sigma_x[j] * sigma_x[j]
                       + sigma_y[j] * sigma_y[j] + tau_sq)
        tj = (Gamma_hat[j] - beta * gamma_hat[j]) / sj
        if psi_kind == 0:
            p1t = tj
        else:
            p1t = min(max(tj, -k), k)
        w = _weight_scalar(beta, tau_sq, gamma_hat[j], sigma_x[j],
                           Gamma_hat[j], sigma_y[j], p1, v1, v2, nl)
        c1 += w * p1t / sj
        c2 += (tj * p1t - delta) / (sj * sj)
    return c1, c2


@njit(cache=True)
def profile_neg_loglik(beta, gamma_hat, sigma_x, Gamma_hat, sigma_y):
    total = 0.0
    for j in range(gamma_hat.size):
        r = Gamma_hat[j] - beta * gamma_hat[j]
        var = beta * beta * sigma_x[j] * sigma_x[j] + sigma_y[j] * sigma_y[j]
        total += r * r / var
    return 0.5 * total


@njit(cache=True)
def em_fit_mixture(z, p1, v1, v2, max_iter, tol, loglik_hist):
    n = z.size
    prev = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # per-iteration constants of the two component log-densities
        edge = p1 <= 0.0 or p1 >= 1.0
        if edge:
            ca = math.log(p1) if p1 > 0.0 else -np.inf
            cb = math.log1p(-p1) if p1 < 1.0 else -np.inf
        else:
            ca = math.log(p1)
            cb = math.log1p(-p1)
        ca += -0.5 * (LOG_2PI + math.log(v1))
        cb += -0.5 * (LOG_2PI + math.log(v2))
        ha = 0.5 / v1
        hb = 0.5 / v2
        ll = 0.0
        sr = 0.0
        sr_z2 = 0.0
        s1r_z2 = 0.0
        for j in range(n):
            z2 = z[j] * z[j]
            la = ca - z2 * ha
            lb = cb - z2 * hb
            if la >= lb:
                e = math.exp(lb - la)
                ll += la + math.log1p(e)
                r = 1.0 / (1.0 + e)
            else:
                e = math.exp(la - lb)
                ll += lb + math.log1p(e)
                r = e / (1.0 + e)
            sr += r
            sr_z2 += r * z2
            s1r_z2 += (1.0 - r) * z2
        loglik_hist[it - 1] = ll
        if np.isfinite(prev) and abs(ll - prev) < tol:
            converged = True
            break
        prev = ll
        p1 = sr / n
        if sr > 0.0:
            v1 = max(sr_z2 / sr, 1.0)
        if n - sr > 0.0:
            v2 = max(s1r_z2 / (n - sr), 1.0)
    return p1, v1, v2, it, converged
