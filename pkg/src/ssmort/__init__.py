"""Bayesian state-space mortality modelling with cohort effects.

Estimation (conjugate Gibbs with FFBS state blocks), diagnostics
(one-step-ahead residual grids, conditional DIC) and posterior
predictive forecasting for the Lee-Carter model and its simplified /
full cohort extensions.
"""

from .model import (
    AgeYearWindow,
    CorruptedPathError,
    DataPanel,
    DegenerateDrawError,
    ModelKind,
    ModelSpec,
    StatePath,
    StaticParams,
    SystemMatrices,
    apply_constraints,
    build_system,
    center_state_path,
    extract_cohort_series,
)
from .lgssm import (
    FilterOutput,
    FilterState,
    IllConditionedSystemError,
    ffbs_sample,
    kalman_filter,
    kalman_step,
)
from .gibbs import (
    GaussianPrior,
    Hyperpriors,
    InverseGammaPrior,
    PosteriorChain,
    SamplerConfig,
    SamplerError,
    default_init,
    run_chain,
    sample_gaussian_posteriors,
    sample_variance_posteriors,
)
from .chainio import ChainFileError, load_chain, save_chain_csv, save_chain_json
from .diagnostics import DicReport, ResidualGrid, compute_dic, compute_residuals, conditional_loglik
from .forecast import FactorProjection, ForecastResult, forecast, project_factors
from .data_io import (
    DataError,
    RawVitalTable,
    SyntheticTruth,
    crude_rates,
    death_probability,
    initial_exposures,
    load_panel_csv,
    load_panel_json,
    read_vital_table,
    save_panel_csv,
    save_panel_json,
    save_vital_table,
    simulate_panel,
)

__version__ = "0.1.0"

__all__ = [
    "AgeYearWindow",
    "DataPanel",
    "ModelKind",
    "ModelSpec",
    "StatePath",
    "StaticParams",
    "SystemMatrices",
    "apply_constraints",
    "build_system",
    "center_state_path",
    "extract_cohort_series",
    "FilterOutput",
    "FilterState",
    "kalman_filter",
    "kalman_step",
    "ffbs_sample",
    "GaussianPrior",
    "InverseGammaPrior",
    "Hyperpriors",
    "SamplerConfig",
    "PosteriorChain",
    "default_init",
    "run_chain",
    "sample_gaussian_posteriors",
    "sample_variance_posteriors",
    "load_chain",
    "save_chain_csv",
    "save_chain_json",
    "DicReport",
    "ResidualGrid",
    "compute_dic",
    "compute_residuals",
    "conditional_loglik",
    "ForecastResult",
    "FactorProjection",
    "forecast",
    "project_factors",
    "RawVitalTable",
    "SyntheticTruth",
    "crude_rates",
    "death_probability",
    "initial_exposures",
    "read_vital_table",
    "save_vital_table",
    "simulate_panel",
    "save_panel_csv",
    "load_panel_csv",
    "save_panel_json",
    "load_panel_json",
    "DegenerateDrawError",
    "CorruptedPathError",
    "IllConditionedSystemError",
    "SamplerError",
    "ChainFileError",
    "DataError",
]
