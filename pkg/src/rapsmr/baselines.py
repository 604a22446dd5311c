"""Reference estimators: IVW, Egger regression and the weighted median."""

from dataclasses import dataclass

import numpy as np


@dataclass
class BaselineFit:
    method: str
    beta_hat: float
    se_beta: float
    intercept: float = None

    def __post_init__(self):
        if self.se_beta <= 0:
            raise ValueError("se_beta must be positive")


def ivw(data):
    """Inverse-variance weighted ratio estimate."""
    g, G, sy = data.gamma_hat, data.Gamma_hat, data.sigma_y
    if np.any(g == 0.0):
        raise ValueError("ivw is undefined when any exposure effect is zero")
    w = g * g / (sy * sy)
    beta = float(np.sum(w * (G / g)) / np.sum(w))
    se = float(1.0 / np.sqrt(np.sum(w)))
    return BaselineFit(method="ivw", beta_hat=beta, se_beta=se)


def mr_egger(data):
    """Weighted regression with intercept, SNPs oriented to positive exposure effect.

    The slope SE carries the usual multiplicative dispersion factor, floored
    at one.
    """
    if len(data) < 3:
        raise ValueError("mr_egger needs at least 3 SNPs")
    sign = np.where(data.gamma_hat < 0, -1.0, 1.0)
    g = sign * data.gamma_hat
    G = sign * data.Gamma_hat
    w = 1.0 / (data.sigma_y ** 2)

    X = np.column_stack([np.ones_like(g), g])
    Xw = X * w[:, None]
    xtx = X.T @ Xw
    if np.linalg.matrix_rank(xtx) < 2:
        raise ValueError("rank-deficient design (constant exposure effects?)")
    xtx_inv = np.linalg.inv(xtx)
    coef = xtx_inv @ (Xw.T @ G)
    resid = G - X @ coef
    dof = len(data) - 2
    dispersion = float(np.sum(w * resid ** 2) / dof) if dof > 0 else 1.0
    se_slope = float(np.sqrt(xtx_inv[1, 1]) * max(1.0, np.sqrt(dispersion)))
    return BaselineFit(method="egger", beta_hat=float(coef[1]), se_beta=se_slope,
                       intercept=float(coef[0]))


def _weighted_median(ratios, weights):
    order = np.argsort(ratios)
    r = ratios[order]
    w = weights[order] / np.sum(weights)
    cum = np.cumsum(w) - 0.5 * w
    return float(np.interp(0.5, cum, r))


def weighted_median(data, n_boot=200, seed=0):
    """Weighted median of per-SNP ratios; SE by parametric bootstrap."""
    if len(data) < 3:
        raise ValueError("weighted_median needs at least 3 SNPs")
    g, sx = data.gamma_hat, data.sigma_x
    G, sy = data.Gamma_hat, data.sigma_y
    if np.any(g == 0.0):
        raise ValueError("weighted_median is undefined when any exposure effect is zero")
    weights = g * g / (sy * sy)
    beta = _weighted_median(G / g, weights)

    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        gb = g + sx * rng.standard_normal(g.size)
        Gb = G + sy * rng.standard_normal(g.size)
        ok = gb != 0.0
        boot[b] = _weighted_median(Gb[ok] / gb[ok], gb[ok] ** 2 / (sy[ok] ** 2))
    se = float(np.std(boot, ddof=1))
    return BaselineFit(method="weighted_median", beta_hat=beta, se_beta=max(se, 1e-300))
