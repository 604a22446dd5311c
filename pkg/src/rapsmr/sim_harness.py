"""Synthetic two-sample summary data and estimator scoring.

Six named generative configurations (NOO, ALL, STR, WKS, NUL, EXP) mimic a
lipid-to-heart-disease analysis at three instrument strata, plus a CAD
validation preset with unit causal effect.  Replications are seeded by a
counter-based scheme so any worker count reproduces the same metrics.
"""

import os
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .baselines import ivw, mr_egger, weighted_median
from .gwas_io import SummarySet
from .prior_model import fit_prior
from .raps_core import make_psi, solve

TAU_SQ_DEFAULT = 3.8e-5  # pleiotropy variance shared by the six named settings


@dataclass(frozen=True)
class EffectDist:
    """Distribution of standardized exposure effects."""

    kind: str            # "mixture" | "laplace"
    p1: float = 0.0
    sigma1: float = 0.0
    sigma2: float = 0.0
    rate: float = 0.0

    def sample(self, rng, n):
        if self.kind == "mixture":
            spike = rng.random(n) < self.p1
            sd = np.where(spike, self.sigma1, self.sigma2)
            return sd * rng.standard_normal(n)
        if self.kind == "laplace":
            return rng.laplace(0.0, 1.0 / self.rate, n)
        raise ValueError(f"unknown effect distribution: {self.kind!r}")


@dataclass(frozen=True)
class SimSetting:
    name: str
    p: int
    beta_true: float
    tau: float
    effect_dist: EffectDist
    outlier: bool
    sigma_x: np.ndarray
    sigma_y: np.ndarray


@dataclass
class SimMetrics:
    mean_beta: float
    rmse: float
    coverage: float
    power: float
    n_reps_used: int


_SETTING_PARAMS = {
    # name: (p, beta, outlier, effect distribution)
    "NOO": (898, 0.2, False, EffectDist("mixture", p1=0.92, sigma1=0.47, sigma2=3.48)),
    "ALL": (898, 0.2, True, EffectDist("mixture", p1=0.92, sigma1=0.47, sigma2=3.48)),
    "STR": (11, 0.2, True, EffectDist("mixture", p1=1.0, sigma1=5.93, sigma2=5.93)),
    "WKS": (887, 0.2, True, EffectDist("mixture", p1=0.92, sigma1=0.44, sigma2=2.39)),
    "NUL": (898, 0.0, False, EffectDist("mixture", p1=0.92, sigma1=0.47, sigma2=3.48)),
    "EXP": (898, 0.2, False, EffectDist("laplace", rate=1.5)),
    # validation preset: exposure and outcome are the same disease
    "CAD": (1650, 1.0, False, EffectDist("mixture", p1=0.99, sigma1=0.44, sigma2=4.5)),
}

SETTING_NAMES = tuple(_SETTING_PARAMS)


def load_sigma_reference():
    """Bundled per-SNP standard-error pairs (exposure, outcome)."""
    path = resources.files("rapsmr.data").joinpath("sigma_reference.tsv")
    raw = np.loadtxt(str(path), delimiter="\t", skiprows=1)
    return raw[:, 0].copy(), raw[:, 1].copy()


def make_setting(name, sigma_source=None):
    """Build a named setting, drawing SE vectors from ``sigma_source``."""
    if name not in _SETTING_PARAMS:
        raise ValueError(f"unknown setting {name!r}; choose from {SETTING_NAMES}")
    p, beta, outlier, dist = _SETTING_PARAMS[name]
    sx, sy = sigma_source if sigma_source is not None else load_sigma_reference()
    if len(sx) < p or len(sy) < p:
        raise ValueError(f"sigma source must provide at least {p} pairs")
    tau = 0.0 if name == "CAD" else float(np.sqrt(TAU_SQ_DEFAULT))
    return SimSetting(name=name, p=p, beta_true=beta, tau=tau, effect_dist=dist,
                      outlier=outlier,
                      sigma_x=np.ascontiguousarray(sx[:p], dtype=np.float64),
                      sigma_y=np.ascontiguousarray(sy[:p], dtype=np.float64))


def generate(setting, seed):
    """One synthetic SummarySet; bit-identical for identical (setting, seed)."""
    rng = np.random.default_rng(seed)
    p = setting.p
    sx, sy = setting.sigma_x, setting.sigma_y
    gamma = setting.effect_dist.sample(rng, p) * sx
    alpha = rng.normal(0.0, setting.tau, p) if setting.tau > 0 else np.zeros(p)
    if setting.outlier:
        # planted on the largest positive effect so the pull is directional
        # across replications (a plain |gamma| argmax would cancel on average)
        alpha[np.argmax(gamma)] -= 5.0 * setting.tau
    Gamma = setting.beta_true * gamma + alpha
    gamma_hat = gamma + sx * rng.standard_normal(p)
    Gamma_hat = Gamma + sy * rng.standard_normal(p)
    snps = [f"snp{j:05d}" for j in range(p)]
    return SummarySet(snps=snps, gamma_hat=gamma_hat, sigma_x=sx.copy(),
                      Gamma_hat=Gamma_hat, sigma_y=sy.copy())


def no_outlier(setting):
    """The same setting with the planted outlier disabled."""
    return replace(setting, outlier=False)


@dataclass(frozen=True)
class EstimatorSpec:
    name: str
    kind: str                 # "raps" | "ivw" | "egger" | "weighted_median"
    weight_mode: str = "shrinkage"
    psi_kind: str = "huber"
    huber_k: float = 1.345
    overdispersion: bool = True


def make_estimator(name, psi_kind="huber", huber_k=1.345, overdispersion=True):
    """Estimator spec from a short name.

    ``raps_mle`` / ``raps_shrinkage`` take the psi and overdispersion options;
    ``ivw``, ``egger`` and ``weighted_median`` ignore them.
    """
    if name in ("ivw", "egger", "weighted_median"):
        return EstimatorSpec(name=name, kind=name)
    if name == "raps_mle":
        return EstimatorSpec(name=name, kind="raps", weight_mode="mle",
                             psi_kind=psi_kind, huber_k=huber_k,
                             overdispersion=overdispersion)
    if name == "raps_shrinkage":
        return EstimatorSpec(name=name, kind="raps", weight_mode="shrinkage",
                             psi_kind=psi_kind, huber_k=huber_k,
                             overdispersion=overdispersion)
    raise ValueError(f"unknown estimator {name!r}")


def apply_estimator(spec, data, seed=0):
    """Fit one estimator; returns (beta_hat, se_beta) or None when unusable."""
    try:
        if spec.kind == "ivw":
            fit = ivw(data)
        elif spec.kind == "egger":
            fit = mr_egger(data)
        elif spec.kind == "weighted_median":
            fit = weighted_median(data, seed=seed)
        elif spec.kind == "raps":
            psi = make_psi(spec.psi_kind, spec.huber_k)
            prior = None
            if spec.weight_mode == "shrinkage":
                prior = fit_prior(data.gamma_hat / data.sigma_x).prior
            rfit = solve(data, prior=prior, psi=psi,
                         overdispersion=spec.overdispersion,
                         weight_mode=spec.weight_mode)
            if rfit.status != "ok" or rfit.se_beta is None:
                return None
            return rfit.beta_hat, rfit.se_beta
        else:
            raise ValueError(f"unknown estimator kind {spec.kind!r}")
    except (ValueError, np.linalg.LinAlgError):
        return None
    return fit.beta_hat, fit.se_beta


def child_seed(master_seed, rep):
    """Counter-based per-replication seed, stable across worker counts."""
    ss = np.random.SeedSequence(entropy=(int(master_seed), int(rep)))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_one(args):
    setting, specs, master_seed, rep = args
    seed = child_seed(master_seed, rep)
    data = generate(setting, seed)
    return [apply_estimator(spec, data, seed=child_seed(seed, i))
            for i, spec in enumerate(specs)]


def _worker_count(workers):
    if workers is not None:
        return max(int(workers), 1)
    env = os.environ.get("RAPS_THREADS", "").strip()
    return max(int(env), 1) if env else 1


def run_study(setting, estimators, n_reps, seed, workers=None, keep_reps=False):
    """Score estimators over replications of one setting.

    Returns ``{estimator name: SimMetrics}``; replications where an estimator
    fails (no root, ambiguous roots, degenerate input) are excluded from its
    metrics and reflected in ``n_reps_used``.  With ``keep_reps`` the raw
    (beta, se) per replication is attached as ``.reps`` on each metrics entry.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    specs = [make_estimator(e) if isinstance(e, str) else e for e in estimators]
    tasks = [(setting, specs, seed, r) for r in range(n_reps)]

    n_workers = _worker_count(workers)
    if n_workers > 1:
        from multiprocessing import get_context

        with get_context("fork").Pool(n_workers) as pool:
            rows = pool.map(_run_one, tasks, chunksize=max(1, n_reps // (4 * n_workers)))
    else:
        rows = [_run_one(t) for t in tasks]

    out = {}
    for i, spec in enumerate(specs):
        fits = [row[i] for row in rows if row[i] is not None]
        if not fits:
            raise ValueError(f"all replications failed for estimator {spec.name!r}")
        beta = np.array([b for b, _ in fits])
        se = np.array([s for _, s in fits])
        lo, hi = beta - 1.96 * se, beta + 1.96 * se
        metrics = SimMetrics(
            mean_beta=float(np.mean(beta)),
            rmse=float(np.sqrt(np.mean((beta - setting.beta_true) ** 2))),
            coverage=float(np.mean((lo <= setting.beta_true) & (setting.beta_true <= hi))),
            power=float(np.mean((lo > 0.0) | (hi < 0.0))),
            n_reps_used=len(fits),
        )
        if keep_reps:
            metrics.reps = (beta, se)
        out[spec.name] = metrics
    return out
