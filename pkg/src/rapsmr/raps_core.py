"""Robust estimating equations for the causal effect and overdispersion.

Two stacked equations are solved: the weighted score of the causal slope
(instrument weights are either conditional MLEs or empirical Bayes posterior
means) and a centered second-moment equation for the pleiotropy variance.
Multiple finite roots are resolved against the profile-likelihood point
estimate; standard errors come from a sandwich built on the robust-score
moment constants.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .backend import kernels as K

_PSI_CODES = {"identity": 0, "huber": 1}
#: no-shrinkage sentinel understood by the weight kernels
_MLE_CODE = (-1.0, 0.0, 0.0)

ROOT_DEDUP_TOL = 1e-6
AMBIGUITY_RATIO = 5.0


def _gh_expect(f, n=64):
    """E[f(Z)] for standard normal Z by n-node Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return float(np.sum(w * f(np.sqrt(2.0) * x)) / np.sqrt(np.pi))


@dataclass(frozen=True)
class PsiFunction:
    """Odd score function with its standard-normal moment constants."""

    kind: str
    k: float
    delta: float  # E[t psi1(t)]
    c1: float     # E[psi1(t)^2]
    c2: float     # Var(t psi1(t))
    c3: float     # E[t psi1'(t) - psi1(t)]

    def psi1(self, t):
        if self.kind == "identity":
            return np.asarray(t, dtype=np.float64)
        return np.clip(t, -self.k, self.k)

    def psi1_prime(self, t):
        if self.kind == "identity":
            return np.ones_like(np.asarray(t, dtype=np.float64))
        return (np.abs(t) <= self.k).astype(np.float64)

    def psi2(self, t):
        return np.asarray(t) * self.psi1(t)

    @property
    def code(self):
        return _PSI_CODES[self.kind]


def make_psi(kind="huber", k=1.345):
    """Construct a PsiFunction; Huber constants use 64-node quadrature."""
    if kind == "identity":
        return PsiFunction(kind="identity", k=math.inf, delta=1.0, c1=1.0, c2=2.0, c3=0.0)
    if kind != "huber":
        raise ValueError(f"unknown psi kind: {kind!r}")
    if k <= 0:
        raise ValueError("huber tuning constant must be positive")
    clip = lambda t: np.clip(t, -k, k)
    delta = _gh_expect(lambda t: t * clip(t))
    c1 = _gh_expect(lambda t: clip(t) ** 2)
    c2 = _gh_expect(lambda t: (t * clip(t)) ** 2) - delta ** 2
    c3 = _gh_expect(lambda t: t * (np.abs(t) <= k) - clip(t))
    return PsiFunction(kind="huber", k=k, delta=delta, c1=c1, c2=c2, c3=c3)


@dataclass
class RapsFit:
    weight_mode: str
    overdispersed: bool
    psi: PsiFunction
    status: str                      # ok | multiple_ambiguous_roots | no_root
    anchor_beta: float
    roots_found: list                # [(beta, tau_sq), ...]
    n_snps: int
    beta_hat: float = None
    tau_sq_hat: float = None
    se_beta: float = None
    se_tau_sq: float = None

    def to_text(self):
        lines = [
            f"status\t{self.status}",
            f"weight_mode\t{self.weight_mode}",
            f"psi\t{self.psi.kind}",
            f"overdispersion\t{'on' if self.overdispersed else 'off'}",
            f"n_snps\t{self.n_snps}",
            f"anchor_beta\t{self.anchor_beta:.12g}",
            f"n_roots\t{len(self.roots_found)}",
        ]
        if self.psi.kind == "huber":
            lines.insert(3, f"huber_k\t{self.psi.k:.10g}")
        if self.status == "ok":
            lines += [
                f"beta_hat\t{self.beta_hat:.12g}",
                f"tau_sq_hat\t{self.tau_sq_hat:.12g}",
                f"se_beta\t{'' if self.se_beta is None else format(self.se_beta, '.12g')}",
                f"se_tau_sq\t{'' if self.se_tau_sq is None else format(self.se_tau_sq, '.12g')}",
            ]
        return "\n".join(lines) + "\n"


def _prior_code(prior):
    if prior is None:
        return _MLE_CODE
    return (prior.p1, prior.sigma1_sq, prior.sigma2_sq)


def standardized_residual(beta, tau_sq, snp):
    """Residual of one SNP scaled by its total standard deviation."""
    gamma_hat, sigma_x, Gamma_hat, sigma_y = snp
    if sigma_x <= 0 or sigma_y <= 0:
        raise ValueError("standard errors must be positive")
    if tau_sq < 0:
        raise ValueError("tau_sq must be non-negative")
    s = math.sqrt(beta * beta * sigma_x * sigma_x + sigma_y * sigma_y + tau_sq)
    return (Gamma_hat - beta * gamma_hat) / s


def estimating_functions(beta, tau_sq, data, prior, psi):
    """Evaluate (C1, C2) on a SummarySet; ``prior=None`` gives MLE weights."""
    p1, v1, v2 = _prior_code(prior)
    return K.estimating_functions(
        float(beta), float(tau_sq),
        data.gamma_hat, data.sigma_x, data.Gamma_hat, data.sigma_y,
        p1, v1, v2, psi.code, psi.k, psi.delta,
    )


def per_snp_terms(beta, tau_sq, data, prior):
    """Weights, standardized residuals and scales at (beta, tau_sq)."""
    p1, v1, v2 = _prior_code(prior)
    w = K.snp_weights(float(beta), float(tau_sq), data.gamma_hat, data.sigma_x,
                      data.Gamma_hat, data.sigma_y, p1, v1, v2)
    t, s = K.residual_terms(float(beta), float(tau_sq), data.gamma_hat,
                            data.sigma_x, data.Gamma_hat, data.sigma_y)
    return w, t, s


def profile_anchor(data):
    """Profile-likelihood slope estimate and a curvature-based scale.

    The anchor maximizes the likelihood with per-SNP nuisance effects
    profiled out; it is unique up to numerical tolerance and pins down which
    root of the robust equations is reported.
    """
    g, sx = data.gamma_hat, data.sigma_x
    G, sy = data.Gamma_hat, data.sigma_y

    def f(beta):
        return K.profile_neg_loglik(float(beta), g, sx, G, sy)

    wy = 1.0 / (sy * sy)
    denom = float(np.sum(g * g * wy))
    if denom > 0:
        center = float(np.sum(g * G * wy)) / denom
        se0 = 1.0 / math.sqrt(denom)
    else:
        center, se0 = 0.0, 1.0

    half = max(10.0 * se0, 0.5 * abs(center), 1e-3)
    for _ in range(8):
        grid = np.linspace(center - half, center + half, 129)
        vals = np.array([f(b) for b in grid])
        i = int(np.argmin(vals))
        if 0 < i < len(grid) - 1:
            break
        half *= 4.0
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    beta_pl = _brent_min(f, lo, hi)

    h = 1e-4 * (1.0 + abs(beta_pl))
    d2 = (f(beta_pl + h) - 2.0 * f(beta_pl) + f(beta_pl - h)) / (h * h)
    scale = 1.0 / math.sqrt(d2) if d2 > 0 and math.isfinite(d2) else se0
    return beta_pl, max(scale, 1e-12)


def _brent_min(f, lo, hi, tol=1e-12, max_iter=200):
    """Golden-section/parabolic minimization on [lo, hi]."""
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                          options={"xatol": tol * (1.0 + abs(lo) + abs(hi)),
                                   "maxiter": max_iter})
    return float(res.x)


class _System:
    """Cached estimating-function evaluations for one dataset/prior/psi."""

    def __init__(self, data, prior, psi, weight_mode):
        self.data = data
        self.psi = psi
        if weight_mode == "mle":
            self.pcode = _MLE_CODE
        elif weight_mode == "shrinkage":
            if prior is None:
                raise ValueError("shrinkage weights need a fitted prior")
            self.pcode = _prior_code(prior)
        else:
            raise ValueError(f"unknown weight_mode: {weight_mode!r}")
        self._args = (data.gamma_hat, data.sigma_x, data.Gamma_hat, data.sigma_y)

    def both(self, beta, tau_sq):
        p1, v1, v2 = self.pcode
        return K.estimating_functions(float(beta), float(tau_sq), *self._args,
                                      p1, v1, v2, self.psi.code, self.psi.k,
                                      self.psi.delta)

    def c1(self, beta, tau_sq):
        return self.both(beta, tau_sq)[0]

    def c2(self, beta, tau_sq):
        return self.both(beta, tau_sq)[1]


def _scan_beta_roots(sys_, tau_sq, grid):
    """Sign-change roots of C1(., tau_sq) on a monotone grid."""
    vals = [sys_.c1(b, tau_sq) for b in grid]
    roots = []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0.0:
            roots.append(brentq(lambda x: sys_.c1(x, tau_sq), grid[i], grid[i + 1],
                                xtol=1e-13, rtol=8.9e-16, maxiter=300))
    if vals and vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return roots


def _local_beta_root(sys_, beta, tau_sq, scale):
    """Root of C1(., tau_sq) nearest the current beta, or None."""
    f = lambda x: sys_.c1(x, tau_sq)
    f0 = f(beta)
    if f0 == 0.0:
        return beta
    h = 1e-3 * scale
    for _ in range(18):
        a, b = beta - h, beta + h
        fa, fb = f(a), f(b)
        left = fa * f0 < 0.0
        right = fb * f0 < 0.0
        if left and right:
            r1 = brentq(f, a, beta, xtol=1e-13, rtol=8.9e-16, maxiter=300)
            r2 = brentq(f, beta, b, xtol=1e-13, rtol=8.9e-16, maxiter=300)
            return r1 if abs(r1 - beta) <= abs(r2 - beta) else r2
        if left:
            return brentq(f, a, beta, xtol=1e-13, rtol=8.9e-16, maxiter=300)
        if right:
            return brentq(f, beta, b, xtol=1e-13, rtol=8.9e-16, maxiter=300)
        h *= 2.0
    return None


def _solve_tau(sys_, beta, tau_guess):
    """Root of C2(beta, .) clamped to [0, inf)."""
    f = lambda tq: sys_.c2(beta, tq)
    f0 = f(0.0)
    if f0 <= 0.0:
        return 0.0
    hi = max(tau_guess * 2.0, float(np.median(sys_.data.sigma_y ** 2)), 1e-12)
    for _ in range(80):
        if f(hi) < 0.0:
            break
        hi *= 4.0
    else:
        return math.inf
    return brentq(f, 0.0, hi, xtol=1e-300, rtol=8.9e-16, maxiter=300)


def _nested_solve(sys_, beta0, scale, overdispersion, max_iter=200):
    """Alternate the beta root-solve and the tau^2 solve to a fixed point."""
    beta, tau = float(beta0), 0.0
    for _ in range(max_iter):
        tau_new = _solve_tau(sys_, beta, tau) if overdispersion else 0.0
        if not math.isfinite(tau_new):
            return None
        beta_new = _local_beta_root(sys_, beta, tau_new, scale)
        if beta_new is None:
            return None
        done = (abs(beta_new - beta) <= 1e-11 * (1.0 + abs(beta_new))
                and abs(tau_new - tau) <= 1e-11 * (1.0 + tau_new))
        beta, tau = beta_new, tau_new
        if done:
            break
    return beta, tau


class _PriorView:
    """Lightweight (p1, sigma1_sq, sigma2_sq) holder for internal calls."""

    def __init__(self, p1, sigma1_sq, sigma2_sq):
        self.p1, self.sigma1_sq, self.sigma2_sq = p1, sigma1_sq, sigma2_sq


def _verify_root(sys_, beta, tau, overdispersion):
    c1, c2 = sys_.both(beta, tau)
    w, t, s = per_snp_terms(beta, tau, sys_.data,
                            None if sys_.pcode == _MLE_CODE else _PriorView(*sys_.pcode))
    tol1 = 1e-8 * max(1.0, float(np.sum(np.abs(w) / s)))
    if abs(c1) > tol1:
        return False
    if not overdispersion:
        return True
    tol2 = 1e-8 * max(1.0, float(np.sum(1.0 / (s * s))))
    if tau == 0.0:
        return c2 <= tol2
    return abs(c2) <= tol2


def _dedup_roots(roots):
    roots = sorted(roots, key=lambda r: r[0])
    out = []
    for r in roots:
        if out and abs(r[0] - out[-1][0]) <= ROOT_DEDUP_TOL:
            continue
        out.append(r)
    return out


def solve(data, prior=None, psi=None, overdispersion=True, weight_mode="shrinkage",
          n_grid=32, grid_width=6.0):
    """Fit the causal effect (and overdispersion) on one SummarySet.

    Candidate roots are collected by multi-start over a grid centered at the
    profile-likelihood anchor; the anchor-closest root is reported unless a
    competing root sits within ``AMBIGUITY_RATIO`` times that distance, in
    which case no estimate is returned (status ``multiple_ambiguous_roots``).
    """
    psi = psi or make_psi("huber")
    p = len(data)
    min_p = 3 if overdispersion else 2
    if p < min_p:
        raise ValueError(f"need at least {min_p} SNPs for this fit, got {p}")

    sys_ = _System(data, prior, psi, weight_mode)
    anchor, scale = profile_anchor(data)
    grid = anchor + scale * np.linspace(-grid_width, grid_width, n_grid)

    seeds = _scan_beta_roots(sys_, 0.0, grid)
    if not seeds and overdispersion:
        # the slope equation may only cross zero once residuals are allowed
        # their overdispersion; rescan at the anchor's solved level
        tau0 = _solve_tau(sys_, anchor, 0.0)
        if math.isfinite(tau0) and tau0 > 0.0:
            seeds = _scan_beta_roots(sys_, tau0, grid)
    candidates = []
    if not overdispersion:
        candidates = [(b, 0.0) for b in seeds]
    else:
        for b in seeds:
            sol = _nested_solve(sys_, b, scale, overdispersion=True)
            if sol is not None:
                candidates.append(sol)
        # roots may only appear at the solved overdispersion levels
        for tau in sorted({round(t, 12) for _, t in candidates if t > 0.0}):
            for b in _scan_beta_roots(sys_, tau, grid):
                if any(abs(b - cb) <= ROOT_DEDUP_TOL for cb, _ in candidates):
                    continue
                sol = _nested_solve(sys_, b, scale, overdispersion=True)
                if sol is not None:
                    candidates.append(sol)

    roots = _dedup_roots([c for c in candidates
                          if _verify_root(sys_, c[0], c[1], overdispersion)])
    base = dict(weight_mode=weight_mode, overdispersed=overdispersion, psi=psi,
                anchor_beta=anchor, roots_found=roots, n_snps=p)

    if not roots:
        return RapsFit(status="no_root", **base)

    dist = [abs(b - anchor) for b, _ in roots]
    i_best = int(np.argmin(dist))
    others = [d for j, d in enumerate(dist) if j != i_best]
    if others and min(others) <= AMBIGUITY_RATIO * dist[i_best]:
        return RapsFit(status="multiple_ambiguous_roots", **base)

    beta_hat, tau_hat = roots[i_best]
    fit = RapsFit(status="ok", beta_hat=beta_hat, tau_sq_hat=tau_hat, **base)
    try:
        cov = variance_estimate(beta_hat, tau_hat, data,
                                None if weight_mode == "mle" else prior,
                                psi, overdispersion=overdispersion)
        se_b = math.sqrt(cov[0, 0]) if cov[0, 0] > 0 else None
        se_t = math.sqrt(cov[1, 1]) if cov[1, 1] > 0 else None
        if se_b is not None and math.isfinite(se_b):
            fit.se_beta = se_b
        if overdispersion and se_t is not None and math.isfinite(se_t):
            fit.se_tau_sq = se_t
    except np.linalg.LinAlgError:
        pass
    return fit


def variance_estimate(beta_hat, tau_sq_hat, data, prior, psi, overdispersion=True):
    """Sandwich covariance of (beta_hat, tau_sq_hat).

    The bread uses the score-gradient block form with derivatives of the
    weights and residuals taken by central finite differences; the meat uses
    the standard-normal moment constants of the score function.  Raises
    ``numpy.linalg.LinAlgError`` when the gradient matrix is singular.
    """
    w, t, s = per_snp_terms(beta_hat, tau_sq_hat, data, prior)
    p1t = psi.psi1(t)
    p1p = psi.psi1_prime(t)

    h_b = 1e-5 * (1.0 + abs(beta_hat))
    w_bp, t_bp, _ = per_snp_terms(beta_hat + h_b, tau_sq_hat, data, prior)
    w_bm, t_bm, _ = per_snp_terms(beta_hat - h_b, tau_sq_hat, data, prior)
    dw_db = (w_bp - w_bm) / (2.0 * h_b)
    dt_db = (t_bp - t_bm) / (2.0 * h_b)

    v11 = psi.c1 * float(np.sum(w * w / (s * s)))
    a11 = float(np.sum((p1t * dw_db + w * p1p * dt_db) / s))

    if not overdispersion:
        if a11 == 0.0:
            raise np.linalg.LinAlgError("singular score gradient")
        return np.array([[v11 / (a11 * a11), 0.0], [0.0, 0.0]])

    # keep tau_sq - h inside the region where every total variance is positive
    min_var = float(np.min(beta_hat ** 2 * data.sigma_x ** 2 + data.sigma_y ** 2))
    h_t = min(1e-5 * (1.0 + tau_sq_hat), 0.5 * (min_var + tau_sq_hat))
    w_tp, _, _ = per_snp_terms(beta_hat, tau_sq_hat + h_t, data, prior)
    w_tm, _, _ = per_snp_terms(beta_hat, tau_sq_hat - h_t, data, prior)
    dw_dt = (w_tp - w_tm) / (2.0 * h_t)

    a12 = float(np.sum(p1t * dw_dt / s))
    a22 = (psi.delta + psi.c3) * float(np.sum(1.0 / (2.0 * s ** 4)))
    v22 = psi.c2 * float(np.sum(w * w / s ** 4))

    grad = np.array([[a11, a12], [0.0, a22]])
    meat = np.diag([v11, v22])
    inv = np.linalg.inv(grad)  # raises LinAlgError when singular
    return inv @ meat @ inv.T
