"""Inverse probability of censoring weighting.

Switchers are artificially censored at their switch time; control-arm
non-switch probability is modeled with a discrete-time pooled logistic
(interval grid of cfg.interval_days, baseline covariates only, no time
terms).  Because covariates are fixed over time, the person-interval
likelihood factorizes into one binomial term per patient, which is what
_fit_logistic maximizes.

Weight conventions (fixed here, relied on by the tests):
  * interval j covers (j*D, (j+1)*D]; a timeline of length t contributes
    ceil(t/D) intervals and has completed floor(t/D) of them;
  * a switch is the event of the last contributed interval;
  * the cumulative weight through interval j multiplies (1-p0)/(1-p_i)
    (or 1/(1-p_i) unstabilized) once per interval 0..j;
  * the analysis weight of a patient is the cumulative weight over their
    COMPLETED intervals; truncation caps trajectory values at the
    cfg.truncation_quantile of the at-risk weight distribution per interval.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..data import Dataset
from ..errors import ConfigError, EmptyInput, NonConvergence, PerfectPrediction
from ..results import AdjustmentResult, Method
from ..survival import cox_fit

ALL_COVARIATES = ("age", "ecog", "prior_lines", "risk_level")
_ETA_ABORT = -np.log(1e-8)  # logit of 1 - 1e-8


@dataclass(frozen=True)
class IpcwConfig:
    interval_days: float = 30.0
    stabilized: bool = True
    truncation_quantile: float = 0.99
    covariate_set: tuple[str, ...] = ALL_COVARIATES

    def __post_init__(self):
        if self.interval_days <= 0:
            raise ConfigError("interval_days must be > 0")
        if not 0.5 < self.truncation_quantile <= 1.0:
            raise ConfigError("truncation_quantile must be in (0.5, 1]")
        unknown = set(self.covariate_set) - set(ALL_COVARIATES)
        if unknown:
            raise ConfigError(f"unknown covariates: {sorted(unknown)}")


@dataclass(frozen=True)
class SwitchModel:
    """Fitted switching-hazard model: logit P(switch in an interval) = X b."""

    names: tuple[str, ...]  # design columns after the intercept
    coefs: tuple[float, ...]  # intercept first, aligned with names after it
    p0: float  # intercept-only per-interval switch probability
    interval_days: float
    dropped: tuple[str, ...]  # zero-variance covariates removed from the design

    def per_interval_p(self, d: Dataset) -> np.ndarray:
        if not self.names:  # degenerate design: exactly the stabilizer model
            return np.full(len(d), self.p0)
        X = _design(d, self.names)
        eta = self.coefs[0] + X @ np.asarray(self.coefs[1:])
        return 1.0 / (1.0 + np.exp(-eta))


@dataclass(frozen=True)
class WeightTrajectory:
    patient_id: str
    weights: tuple[float, ...]  # cumulative stabilized weight through each interval
    final_weight: float


def _design(d: Dataset, names) -> np.ndarray:
    c = d.cols
    cols = {"age": c.age, "ecog": c.ecog, "prior_lines": c.prior_lines, "risk_level": c.risk_level}
    if not names:
        return np.empty((len(d), 0))
    return np.column_stack([cols[n] for n in names])


def _interval_counts(stop: np.ndarray, delta: float):
    n_int = np.ceil(stop / delta).astype(np.int64)
    n_int = np.maximum(n_int, 1)
    completed = np.floor(stop / delta).astype(np.int64)
    # stop exactly on a boundary completes its last interval; never exceed n_int
    completed = np.minimum(completed, n_int)
    return n_int, completed


def _fit_logistic(X: np.ndarray, trials: np.ndarray, events: np.ndarray, max_iter: int = 100):
    """Binomial-logistic MLE with intercept; returns the coefficient vector.

    Newton iterations with step halving; aborts with PerfectPrediction when
    any fitted per-interval probability reaches 1 - 1e-8.
    """
    n, p = X.shape
    Xd = np.column_stack([np.ones(n), X])
    rate = events.sum() / trials.sum()
    rate = min(max(rate, 1e-10), 1 - 1e-10)
    beta = np.zeros(p + 1)
    beta[0] = np.log(rate / (1.0 - rate))

    def loglik(b):
        eta = Xd @ b
        # binomial log-likelihood up to constants: y*eta - n*log(1+e^eta)
        return float(events @ eta - trials @ np.logaddexp(0.0, eta))

    ll = loglik(beta)
    for _ in range(max_iter):
        eta = Xd @ beta
        if np.max(eta) >= _ETA_ABORT:
            raise PerfectPrediction(
                "a covariate pattern predicts switching with probability >= 1 - 1e-8"
            )
        mu = 1.0 / (1.0 + np.exp(-eta))
        grad = Xd.T @ (events - trials * mu)
        w = trials * mu * (1.0 - mu)
        H = Xd.T @ (Xd * w[:, None])
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(H, grad, rcond=None)
        new_beta = beta + step
        new_ll = loglik(new_beta)
        halvings = 0
        while new_ll < ll - 1e-12 and halvings < 30:
            step *= 0.5
            new_beta = beta + step
            new_ll = loglik(new_beta)
            halvings += 1
        improved = new_ll - ll
        beta, ll = new_beta, new_ll
        if abs(improved) < 1e-10:
            eta = Xd @ beta
            if np.max(eta) >= _ETA_ABORT:
                raise PerfectPrediction(
                    "a covariate pattern predicts switching with probability >= 1 - 1e-8"
                )
            return beta
    raise NonConvergence("switching model did not converge")


def fit_switch_model(d: Dataset, cfg: Optional[IpcwConfig] = None) -> SwitchModel:
    """Fit the discrete-time switching model on control-arm timelines."""
    cfg = cfg or IpcwConfig()
    c = d.cols
    control = c.arm == 0
    switched = control & ~np.isnan(c.switch_time)
    if not np.any(switched):
        raise EmptyInput("control arm has no switchers; nothing to model")
    if not np.any(control & np.isnan(c.switch_time)):
        raise EmptyInput("control arm has no non-switchers; weights are unidentifiable")

    stop = np.where(switched, c.switch_time, c.time)[control]
    trials, _ = _interval_counts(stop, cfg.interval_days)
    events = switched[control].astype(float)

    X_full = _design(d, cfg.covariate_set)[control]
    keep, dropped = [], []
    for j, name in enumerate(cfg.covariate_set):
        (keep if np.ptp(X_full[:, j]) > 0 else dropped).append(name)
    p0 = float(events.sum() / trials.sum())
    if keep:
        X = _design(d, tuple(keep))[control]
        beta = _fit_logistic(X, trials.astype(float), events)
    else:
        beta = np.array([np.log(p0 / (1.0 - p0))])
    return SwitchModel(
        names=tuple(keep),
        coefs=tuple(float(b) for b in beta),
        p0=p0,
        interval_days=cfg.interval_days,
        dropped=tuple(dropped),
    )


def compute_weights(d: Dataset, model: SwitchModel, cfg: Optional[IpcwConfig] = None):
    """Per-patient weight trajectories; treatment-arm weights are identically 1.

    Returns (trajectories, n_truncated, untruncated_max) where n_truncated
    counts capped person-intervals.
    """
    cfg = cfg or IpcwConfig()
    c = d.cols
    control = c.arm == 0
    switched = ~np.isnan(c.switch_time)
    stop = np.where(switched, c.switch_time, c.time)
    n_int, completed = _interval_counts(stop, cfg.interval_days)
    p = model.per_interval_p(d)

    # per-interval multiplicative factor is constant per patient (no time terms)
    factor = (1.0 - model.p0) / (1.0 - p) if cfg.stabilized else 1.0 / (1.0 - p)

    ctrl_idx = np.flatnonzero(control)
    max_int = int(n_int[ctrl_idx].max()) if ctrl_idx.size else 0
    raw = {i: factor[i] ** np.arange(1, n_int[i] + 1) for i in ctrl_idx}
    capped = {i: raw[i].copy() for i in ctrl_idx}
    n_truncated = 0
    untruncated_max = max((float(raw[i].max()) for i in ctrl_idx), default=1.0)
    if cfg.truncation_quantile < 1.0:
        for j in range(max_int):
            at_risk = [i for i in ctrl_idx if n_int[i] > j]
            if not at_risk:
                break
            vals = np.array([raw[i][j] for i in at_risk])
            cap = float(np.quantile(vals, cfg.truncation_quantile))
            for i in at_risk:
                if capped[i][j] > cap:
                    capped[i][j] = cap
                    n_truncated += 1

    trajectories = []
    for k, patient in enumerate(d.patients):
        if not control[k]:
            trajectories.append(WeightTrajectory(patient.id, (), 1.0))
            continue
        traj = capped[k]
        done = completed[k]
        final = float(traj[done - 1]) if done > 0 else 1.0
        trajectories.append(WeightTrajectory(patient.id, tuple(float(v) for v in traj), final))
    return trajectories, n_truncated, untruncated_max


def ipcw(d: Dataset, cfg: Optional[IpcwConfig] = None) -> AdjustmentResult:
    """IPCW adjustment: artificial censoring at switch + weighted Cox fit."""
    cfg = cfg or IpcwConfig()
    c = d.cols
    switched = ~np.isnan(c.switch_time)
    if not np.any(switched):
        # nothing to reweight: identical to ITT by construction
        fit = cox_fit(c.time, c.event, c.arm)
        diagnostics = {
            "wt_q50": 1.0, "wt_q90": 1.0, "wt_q99": 1.0, "wt_max": 1.0,
            "n_truncated": 0, "model_coefs": {},
            "log_hr": fit.log_hr, "se": fit.se,
        }
        return AdjustmentResult(Method.IPCW, fit.hr, fit.ci95, diagnostics)

    model = fit_switch_model(d, cfg)
    trajectories, n_truncated, untruncated_max = compute_weights(d, model, cfg)
    weight = np.array([t.final_weight for t in trajectories])
    time = np.where(switched, c.switch_time, c.time)
    event = np.where(switched, False, c.event)
    fit = cox_fit(time, event, c.arm, weight=weight)

    ctrl_w = weight[c.arm == 0]
    coef_names = ("intercept",) + model.names
    diagnostics = {
        "wt_q50": float(np.quantile(ctrl_w, 0.50)),
        "wt_q90": float(np.quantile(ctrl_w, 0.90)),
        "wt_q99": float(np.quantile(ctrl_w, 0.99)),
        "wt_max": untruncated_max,
        "n_truncated": int(n_truncated),
        "model_coefs": {n: c_ for n, c_ in zip(coef_names, model.coefs)},
        "log_hr": fit.log_hr,
        "se": fit.se,
    }
    return AdjustmentResult(Method.IPCW, fit.hr, fit.ci95, diagnostics)
