"""Two-sample summary-data Mendelian randomization with robust profile scores
and empirical Bayes instrument weighting."""

from .backend import BACKEND
from .baselines import BaselineFit, ivw, mr_egger, weighted_median
from .diagnostics import (DiagnosticRecord, default_het_df, diagnostic_table,
                          heterogeneity_test, qq_data)
from .gwas_io import (InstrumentTable, SnpRecord, SummarySet, harmonize,
                      parse_summary_file, select_instruments)
from .prior_model import (FLAT_PRIOR, PosteriorMoments, PriorFit, SpikeSlabPrior,
                          eb_weight, fit_prior, mle_weight, posterior_moments)
from .raps_core import (PsiFunction, RapsFit, estimating_functions, make_psi,
                        per_snp_terms, profile_anchor, solve,
                        standardized_residual, variance_estimate)
from .sim_harness import (EstimatorSpec, SimMetrics, SimSetting, child_seed,
                          generate, load_sigma_reference, make_estimator,
                          make_setting, no_outlier, run_study)

__all__ = [
    "BACKEND", "BaselineFit", "DiagnosticRecord", "EstimatorSpec", "FLAT_PRIOR",
    "InstrumentTable", "PosteriorMoments", "PriorFit", "PsiFunction", "RapsFit",
    "SimMetrics", "SimSetting", "SnpRecord", "SpikeSlabPrior", "SummarySet",
    "child_seed", "default_het_df", "diagnostic_table", "eb_weight",
    "estimating_functions", "fit_prior", "generate", "harmonize",
    "heterogeneity_test", "ivw", "load_sigma_reference", "make_estimator",
    "make_psi", "make_setting", "mle_weight", "mr_egger", "no_outlier",
    "parse_summary_file", "per_snp_terms", "posterior_moments", "profile_anchor",
    "qq_data", "run_study", "select_instruments", "solve",
    "standardized_residual", "variance_estimate", "weighted_median",
]
