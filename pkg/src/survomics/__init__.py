"""Survival analysis for right-censored data with high-dimensional covariates."""

__version__ = "0.1.0"

from .errors import ConfigError, ConvergenceError, DataError, NumericalError, SurvomicsError  # noqa: E402
from .data import (  # noqa: E402
    FeatureMeta,
    SurvivalDataset,
    SurvivalOutcome,
    filter_missingness,
    impute_knn,
    load_dataset,
    standardize,
    write_dataset,
)
from .nonparametric import KMCurve, censoring_km, km_estimate, logrank_test, median_survival, survival_at  # noqa: E402
from .cox import CoxFit, fit_cox_newton, partial_loglik, predict_survival, prognostic_score  # noqa: E402
from .penalized import (  # noqa: E402
    PenaltySpec,
    cv_select_lambda,
    fit_adaptive_lasso,
    fit_cv_enet,
    fit_enet,
    lambda_max,
    lambda_path,
    stability_selection,
)
from .bayes import PriorSpec, posterior_summary, run_mcmc  # noqa: E402
from .metrics import (  # noqa: E402
    antolini_c,
    brier_score,
    calibration_fit,
    dot632plus,
    harrell_c,
    integrated_brier,
    prediction_error_curve,
    time_dependent_auc,
    uno_c,
)
