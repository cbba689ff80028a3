"""Iterative parameter estimation: RPSFTM's counterfactual model with the
acceleration parameter obtained from repeated Weibull AFT fits.

Each round refits the AFT model with group = randomized arm, maps the fitted
log time-ratio to psi = -coef, rebuilds control-arm switchers from the
ORIGINAL observed data with that psi, and repeats until e^psi is stable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data import Dataset
from ..errors import ConfigError, EmptyInput
from ..results import AdjustmentResult, Method
from ..survival import cox_fit, weibull_aft_fit
from .rpsftm import rebuild_dataset


@dataclass(frozen=True)
class IpeConfig:
    tol: float = 1e-5  # convergence on |e^psi_new - e^psi_old|
    max_iter: int = 50
    recensor: bool = True

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError("tol must be > 0")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")


def _fit_psi(time, event, arm) -> float:
    fit = weibull_aft_fit(time, event, arm)
    return -fit.coef_treatment


def ipe(d: Dataset, cfg: Optional[IpeConfig] = None) -> AdjustmentResult:
    """IPE adjustment.  Non-convergence at max_iter is returned (not raised)
    with diagnostics converged = False so sweeps can count it as a failure."""
    cfg = cfg or IpeConfig()
    c = d.cols
    for arm_code in (0, 1):
        in_arm = c.arm == arm_code
        if not np.any(in_arm):
            raise EmptyInput("ipe needs both arms nonempty")
        if not np.any(c.event & in_arm):
            raise EmptyInput("ipe needs at least one event per arm")

    psi = _fit_psi(c.time, c.event, c.arm)
    exp_hist = [float(np.exp(psi))]
    converged = False
    oscillated = False
    iterations = 0
    rebuilt = None
    for iterations in range(1, cfg.max_iter + 1):
        rebuilt = rebuild_dataset(d, (psi,), cfg.recensor)
        psi_new = _fit_psi(rebuilt.u_time, rebuilt.u_event, rebuilt.arm)
        exp_new = float(np.exp(psi_new))
        exp_hist.append(exp_new)
        if abs(exp_new - exp_hist[-2]) < cfg.tol:
            psi = psi_new
            converged = True
            break
        if len(exp_hist) >= 3 and abs(exp_new - exp_hist[-3]) < cfg.tol:
            # two-cycle: settle on the average of the oscillating pair
            psi = float(np.log(0.5 * (exp_new + exp_hist[-2])))
            oscillated = True
            converged = True
            break
        psi = psi_new

    rebuilt = rebuild_dataset(d, (psi,), cfg.recensor)
    fit = cox_fit(rebuilt.u_time, rebuilt.u_event, rebuilt.arm)
    diagnostics = {
        "psi": float(psi),
        "exp_psi": float(np.exp(psi)),
        "iterations": iterations,
        "converged": converged,
        "oscillated": oscillated,
        "log_hr": fit.log_hr,
        "se": fit.se,
    }
    return AdjustmentResult(method=Method.IPE, hr=fit.hr, ci95=fit.ci95, diagnostics=diagnostics)
