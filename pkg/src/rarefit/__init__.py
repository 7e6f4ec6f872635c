"""Penalized logistic regression for rare events.

Jeffreys-prior (Firth-type) estimation with two modifications that remove
the event-rate bias of its predictions (an intercept correction and a
data-augmentation variant with a pseudo-observation indicator), comparator
penalties (weakened Jeffreys, log-F(1,1), Cauchy priors, AIC-tuned ridge),
post-hoc prediction correctors, profile and Wald confidence intervals,
evaluation metrics and a reproducible Monte Carlo scenario engine.
"""

from .core import (
    Dataset,
    WorkingState,
    check_full_rank,
    fisher_information,
    hat_diagonals,
    jeffreys_penalized_loglik,
    log_likelihood,
    predict_probabilities,
    score,
    working_state,
)
from .estimators import (
    CauchyLogisticRegression,
    FirthLogisticRegression,
    FLACLogisticRegression,
    FLICLogisticRegression,
    LogFLogisticRegression,
    MLLogisticRegression,
    RidgeLogisticRegression,
)
from .exceptions import (
    ConvergenceError,
    DataError,
    RankDeficiencyError,
    SingularInformationError,
)
from .fitting import (
    METHODS,
    AugmentedDataset,
    EstimatorSettings,
    FitResult,
    Objective,
    RidgeSettings,
    build_flac_augmented,
    cauchy_objective,
    fit_cauchy,
    fit_firth,
    fit_flac,
    fit_flic,
    fit_logf,
    fit_method,
    fit_ml,
    fit_ridge,
    jeffreys_objective,
    logf_objective,
    ml_objective,
    ridge_objective,
)
from .inference import (
    IntervalSet,
    flic_intercept_ci,
    intervals_for,
    profile_ci,
    wald_ci,
)
from .metrics import (
    EvalReport,
    c_statistic,
    calibration_slope,
    event_rate_bias,
    standardized_coef_summary,
)
from .predictions import PredictionSet, predict_ab, predict_au
from .simgen import (
    DEFAULT_RECIPE,
    SIMULATION_METHODS,
    CovariateRecipe,
    MethodSummary,
    ScenarioConfig,
    ScenarioSummary,
    TrueModel,
    build_true_model,
    calibrate_continuous_coefs,
    calibrate_intercept,
    generate_covariates,
    full_scenario_grid,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "WorkingState",
    "check_full_rank",
    "predict_probabilities",
    "log_likelihood",
    "score",
    "fisher_information",
    "hat_diagonals",
    "jeffreys_penalized_loglik",
    "working_state",
    "EstimatorSettings",
    "RidgeSettings",
    "FitResult",
    "AugmentedDataset",
    "Objective",
    "ml_objective",
    "jeffreys_objective",
    "logf_objective",
    "cauchy_objective",
    "ridge_objective",
    "fit_ml",
    "fit_firth",
    "fit_flic",
    "fit_flac",
    "build_flac_augmented",
    "fit_logf",
    "fit_cauchy",
    "fit_ridge",
    "fit_method",
    "METHODS",
    "MLLogisticRegression",
    "FirthLogisticRegression",
    "FLICLogisticRegression",
    "FLACLogisticRegression",
    "LogFLogisticRegression",
    "CauchyLogisticRegression",
    "RidgeLogisticRegression",
    "PredictionSet",
    "predict_ab",
    "predict_au",
    "IntervalSet",
    "wald_ci",
    "profile_ci",
    "flic_intercept_ci",
    "intervals_for",
    "EvalReport",
    "c_statistic",
    "calibration_slope",
    "event_rate_bias",
    "standardized_coef_summary",
    "CovariateRecipe",
    "DEFAULT_RECIPE",
    "TrueModel",
    "ScenarioConfig",
    "ScenarioSummary",
    "MethodSummary",
    "SIMULATION_METHODS",
    "generate_covariates",
    "calibrate_continuous_coefs",
    "calibrate_intercept",
    "build_true_model",
    "full_scenario_grid",
    "run_scenario",
    "DataError",
    "RankDeficiencyError",
    "SingularInformationError",
    "ConvergenceError",
    "__version__",
]
