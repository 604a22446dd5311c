"""Post-fit diagnostics: residual-vs-strength data, heterogeneity test, Q-Q data.

Under the model, standardized residuals at the fitted parameters are
standard normal and independent of instrument strength; departures show up
as structure in the residual-vs-strength scatter and are scored by an F-test
on a spline expansion of strength.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline
from scipy.stats import f as f_dist
from scipy.stats import norm

from .backend import kernels as K


@dataclass
class DiagnosticRecord:
    rsid: str
    strength: float
    residual: float
    spike_resp: float


def default_het_df(p):
    """Spline degrees of freedom: one per 20 SNPs, clamped to [3, 100]."""
    return int(min(max(p // 20, 3), 100))


def diagnostic_table(fit, data, prior):
    """Per-SNP strength/residual records at the fitted parameters.

    The allele coding of each SNP is chosen so its shrunken strength is
    non-negative; strength is the posterior mean in units of the posterior
    standard deviation.
    """
    if fit.status != "ok":
        raise ValueError(f"diagnostics need a fit with status ok, got {fit.status}")
    beta, tau = fit.beta_hat, fit.tau_sq_hat

    sx2 = data.sigma_x ** 2
    syt = data.sigma_y ** 2 + tau
    denom = 1.0 / sx2 + beta ** 2 / syt
    g_mle = (data.gamma_hat / sx2 + beta * data.Gamma_hat / syt) / denom
    obs_var = 1.0 / (denom * sx2)
    mean, var, resp = K.posterior_stats_z(
        np.ascontiguousarray(g_mle / data.sigma_x), np.ascontiguousarray(obs_var),
        prior.p1, prior.sigma1_sq, prior.sigma2_sq,
    )
    t, _ = K.residual_terms(float(beta), float(tau), data.gamma_hat,
                            data.sigma_x, data.Gamma_hat, data.sigma_y)

    records = []
    for j, rsid in enumerate(data.snps):
        flip = -1.0 if mean[j] < 0 else 1.0
        sd = np.sqrt(var[j])
        strength = abs(mean[j]) / sd if sd > 0 else 0.0
        records.append(DiagnosticRecord(rsid=rsid, strength=float(strength),
                                        residual=float(flip * t[j]),
                                        spike_resp=float(resp[j])))
    return records


def _spline_basis(x, df):
    """df-column open B-spline basis (quantile knots, first column dropped)."""
    degree = min(3, df)
    n_interior = df - degree
    lo, hi = float(np.min(x)), float(np.max(x))
    if n_interior > 0:
        probs = np.arange(1, n_interior + 1) / (n_interior + 1)
        interior = np.quantile(x, probs)
    else:
        interior = np.array([])
    knots = np.concatenate([[lo] * (degree + 1), interior, [hi] * (degree + 1)])
    n_basis = len(knots) - degree - 1
    cols = []
    for i in range(1, n_basis):  # first basis function is absorbed by the intercept
        coef = np.zeros(n_basis)
        coef[i] = 1.0
        spl = BSpline(knots, coef, degree, extrapolate=False)
        col = spl(x)
        cols.append(np.nan_to_num(col, nan=0.0))
    basis = np.column_stack(cols)
    # right boundary belongs to the last basis function
    basis[x == hi, -1] = 1.0
    return basis


def heterogeneity_test(records, df):
    """F-test p-value for any association of residuals with strength.

    Residuals are regressed on an intercept plus a cubic B-spline expansion
    of strength (``df`` basis columns, knots at strength quantiles).  On a
    rank-deficient design the df is halved and the fit retried once.
    """
    if df < 1:
        raise ValueError("df must be at least 1")
    n = len(records)
    if n < df + 2:
        raise ValueError(f"need at least df + 2 = {df + 2} records, got {n}")
    x = np.array([r.strength for r in records])
    y = np.array([r.residual for r in records])

    for attempt, df_try in enumerate((df, max(1, df // 2))):
        try:
            basis = _spline_basis(x, df_try)
        except ValueError:
            basis = None  # degenerate knots behave like a deficient design
        if basis is not None:
            X = np.column_stack([np.ones(n), basis])
            if np.linalg.matrix_rank(X) == X.shape[1]:
                break
        if attempt == 1:
            raise ValueError("rank-deficient spline design (degenerate strengths)")
    df_used = X.shape[1] - 1

    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    rss1 = float(np.sum((y - X @ coef) ** 2))
    rss0 = float(np.sum((y - np.mean(y)) ** 2))
    dof = n - df_used - 1
    if rss1 <= 0.0:
        return 0.0
    f_stat = ((rss0 - rss1) / df_used) / (rss1 / dof)
    return float(f_dist.sf(f_stat, df_used, dof))


def qq_data(records):
    """Ordered residuals paired with standard-normal plotting positions."""
    if not records:
        raise ValueError("no records")
    resid = np.sort([r.residual for r in records])
    n = resid.size
    theo = norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theo, resid])
