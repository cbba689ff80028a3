"""Overall-survival treatment-benefit estimation under treatment switching.

Adjustment methods (itt, exclude, censor, ipcw, rpsftm, ipe, srp, rf), a
calibrated scenario simulator, and a bias/MSE/coverage evaluation harness
over the censor x switch x hazard-ratio factorial.
"""

__version__ = "0.1.0"

from .data import (
    Arm,
    Covariates,
    Dataset,
    PatientRecord,
    SwitchAnnotation,
    load_dataset,
    make_dataset,
    write_dataset,
)
from .evaluate import (
    MetricsRow,
    SWEEP_METHODS,
    evaluate,
    factorial_scenarios,
    recommend,
    run_factorial,
)
from .forest import ForestConfig, RegressionForest, forest_fit, forest_predict
from .methods import (
    ADJUSTERS,
    GEstimationConfig,
    IpcwConfig,
    IpeConfig,
    censor_at_switch,
    exclude_switchers,
    g_estimate,
    ipcw,
    ipe,
    itt,
    rf_adjust,
    rpsftm,
    stratified_rpsftm,
)
from .results import AdjustmentResult, Method
from .simulate import (
    ScenarioConfig,
    SimCoefficients,
    apply_censoring,
    apply_switching,
    calibrate,
    gen_covariates,
    gen_survival,
    generate,
)
from .survival import CoxFit, KaplanMeierCurve, LogRankResult, WeibullAftFit, cox_fit, kaplan_meier, log_rank, weibull_aft_fit

__all__ = [
    "ADJUSTERS",
    "AdjustmentResult",
    "Arm",
    "Covariates",
    "CoxFit",
    "Dataset",
    "ForestConfig",
    "GEstimationConfig",
    "IpcwConfig",
    "IpeConfig",
    "KaplanMeierCurve",
    "LogRankResult",
    "Method",
    "MetricsRow",
    "PatientRecord",
    "RegressionForest",
    "SWEEP_METHODS",
    "ScenarioConfig",
    "SimCoefficients",
    "SwitchAnnotation",
    "WeibullAftFit",
    "apply_censoring",
    "apply_switching",
    "calibrate",
    "censor_at_switch",
    "cox_fit",
    "evaluate",
    "exclude_switchers",
    "factorial_scenarios",
    "forest_fit",
    "forest_predict",
    "g_estimate",
    "gen_covariates",
    "gen_survival",
    "generate",
    "ipcw",
    "ipe",
    "itt",
    "kaplan_meier",
    "load_dataset",
    "log_rank",
    "make_dataset",
    "recommend",
    "rf_adjust",
    "rpsftm",
    "run_factorial",
    "stratified_rpsftm",
    "weibull_aft_fit",
    "write_dataset",
]
