"""The seven adjustment methods, plus a dispatch table keyed by Method."""
from ..results import Method
from .ipcw import IpcwConfig, SwitchModel, WeightTrajectory, compute_weights, fit_switch_model, ipcw
from .ipe import IpeConfig, ipe
from .naive import censor_at_switch, exclude_switchers, itt
from .rf import rf_adjust
from .rpsftm import (
    CounterfactualDataset,
    GEstimationConfig,
    GEstimationResult,
    counterfactual_time,
    g_estimate,
    rebuild_dataset,
    rpsftm,
    stratified_rpsftm,
)

ADJUSTERS = {
    Method.ITT: itt,
    Method.EXCLUDE: exclude_switchers,
    Method.CENSOR: censor_at_switch,
    Method.IPCW: ipcw,
    Method.RPSFTM: rpsftm,
    Method.IPE: ipe,
    Method.STRAT_RPSFTM: stratified_rpsftm,
    Method.RF: rf_adjust,
}

__all__ = [
    "ADJUSTERS",
    "CounterfactualDataset",
    "GEstimationConfig",
    "GEstimationResult",
    "IpcwConfig",
    "IpeConfig",
    "SwitchModel",
    "WeightTrajectory",
    "censor_at_switch",
    "compute_weights",
    "counterfactual_time",
    "exclude_switchers",
    "fit_switch_model",
    "g_estimate",
    "ipcw",
    "ipe",
    "itt",
    "rebuild_dataset",
    "rf_adjust",
    "rpsftm",
    "stratified_rpsftm",
]
