"""Bayesian spatial autoregressive multinomial logit models.

Estimation of share-valued multinomial outcomes whose class log-odds
follow a spatial autoregressive (or spatial Durbin) process, via
Polya-Gamma data augmentation, with direct/indirect impact summaries
and a Monte Carlo benchmark harness.
"""

from .diagnostics import FitStats, GewekeResult, geweke_z, mcfadden_r2, rmse
from .effects import (
    ImpactSummary,
    effect_matrix,
    posterior_impacts,
    summarize_effects,
    summary_effect_draws,
)
from .model import (
    BIVARIATE_SAR_LOGIT,
    MNL,
    SAR_MNL,
    SDM_MNL,
    DesignMatrix,
    ModelSpec,
    ParameterState,
    ShareMatrix,
    class_probabilities,
    competing_logodds_offset,
    log_odds,
    multinomial_loglik,
)
from .montecarlo import (
    DgpConfig,
    McResult,
    format_table,
    generate_dataset,
    run_calibration,
    run_study,
)
from .polya_gamma import PolyaGammaSampler, pg_mean, pg_variance
from .sampler import (
    ChainOutput,
    SamplerConfig,
    run_bivariate_sar_logit,
    run_chain,
    update_beta,
    update_omega,
    update_rho,
)
from .weights import (
    LogDetGrid,
    SpatialWeights,
    build_knn_weights,
    build_logdet_grid,
)

__version__ = "0.1.0"

__all__ = [
    "BIVARIATE_SAR_LOGIT",
    "ChainOutput",
    "DesignMatrix",
    "DgpConfig",
    "FitStats",
    "GewekeResult",
    "ImpactSummary",
    "LogDetGrid",
    "MNL",
    "McResult",
    "ModelSpec",
    "ParameterState",
    "PolyaGammaSampler",
    "SAR_MNL",
    "SDM_MNL",
    "SamplerConfig",
    "ShareMatrix",
    "SpatialWeights",
    "build_knn_weights",
    "build_logdet_grid",
    "class_probabilities",
    "competing_logodds_offset",
    "effect_matrix",
    "format_table",
    "generate_dataset",
    "geweke_z",
    "log_odds",
    "mcfadden_r2",
    "multinomial_loglik",
    "pg_mean",
    "pg_variance",
    "posterior_impacts",
    "rmse",
    "run_bivariate_sar_logit",
    "run_calibration",
    "run_chain",
    "run_study",
    "summarize_effects",
    "summary_effect_draws",
    "update_beta",
    "update_omega",
    "update_rho",
]
