"""Factorial evaluation harness: bias, MSE, and coverage per (scenario,
method) cell, with shared replicate datasets so method comparisons are paired.

Failed replicates (data degeneracies, non-convergence, flagged converged =
False) are excluded from the cell aggregates and counted, never imputed.
The per-scenario recommendation is lexicographic: smallest MSE, then smallest
|bias|, then highest coverage.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .errors import AllReplicatesFailed, ConfigError, SwitchAdjustError
from .methods import ADJUSTERS
from .results import AdjustmentResult, Method
from .simulate import ScenarioConfig, calibrate, generate

# sweep methods, in reporting order
SWEEP_METHODS = (
    Method.ITT,
    Method.RPSFTM,
    Method.IPE,
    Method.CENSOR,
    Method.IPCW,
    Method.RF,
    Method.STRAT_RPSFTM,
)

FACTORIAL_HRS = (0.4, 0.6, 0.8)
FACTORIAL_CENSOR = (0.25, 0.50, 0.75)
FACTORIAL_SWITCH = (0.25, 0.50, 0.75)


@dataclass(frozen=True)
class MetricsRow:
    """Aggregate for one (method, scenario) cell."""

    method: Method
    true_hr: float
    target_censor: float
    target_switch: float
    bias: float
    mse: float
    coverage: float
    n_reps_used: int
    n_failures: int
    mc_se_bias: float
    mc_se_mse: float
    mean_hr: float
    mean_ci_lo: float
    mean_ci_hi: float


@dataclass(frozen=True)
class EstimateRecord:
    """One per-replicate estimate (or failure) for the audit trail."""

    true_hr: float
    target_censor: float
    target_switch: float
    replicate: int
    fingerprint: str
    method: Method
    hr: Optional[float]
    ci_lo: Optional[float]
    ci_hi: Optional[float]
    error: str = ""


def _is_failure(result: Optional[AdjustmentResult]) -> bool:
    if result is None:
        return True
    return result.diagnostics.get("converged") is False


def evaluate(
    results: Sequence[Optional[AdjustmentResult]],
    true_hr: float,
    target_censor: float = float("nan"),
    target_switch: float = float("nan"),
) -> MetricsRow:
    """Aggregate per-replicate results for one cell.

    Entries that are None or flagged converged = False count as failures and
    are excluded from the metrics.
    """
    if not results:
        raise AllReplicatesFailed("no replicates supplied")
    methods = {r.method for r in results if r is not None}
    if len(methods) > 1:
        raise ConfigError(f"mixed methods in one cell: {sorted(m.value for m in methods)}")
    usable = [r for r in results if not _is_failure(r)]
    n_failures = len(results) - len(usable)
    if not usable:
        raise AllReplicatesFailed(f"all {len(results)} replicates failed")

    hr = np.array([r.hr for r in usable])
    lo = np.array([r.ci95[0] for r in usable])
    hi = np.array([r.ci95[1] for r in usable])
    m = hr.size
    sq_err = (hr - true_hr) ** 2
    return MetricsRow(
        method=next(iter(methods)),
        true_hr=true_hr,
        target_censor=target_censor,
        target_switch=target_switch,
        bias=float(true_hr - hr.mean()),
        mse=float(sq_err.mean()),
        coverage=float(np.mean((lo <= true_hr) & (true_hr <= hi))),
        n_reps_used=m,
        n_failures=n_failures,
        mc_se_bias=float(hr.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0,
        mc_se_mse=float(sq_err.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0,
        mean_hr=float(hr.mean()),
        mean_ci_lo=float(lo.mean()),
        mean_ci_hi=float(hi.mean()),
    )


def factorial_scenarios(
    seed: int = 0,
    n: int = 400,
    true_hrs: Sequence[float] = FACTORIAL_HRS,
    target_censors: Sequence[float] = FACTORIAL_CENSOR,
    target_switches: Sequence[float] = FACTORIAL_SWITCH,
    **scenario_kwargs,
) -> list[ScenarioConfig]:
    """The factorial grid in fixed enumeration order (hr outermost), each cell
    on its own seed stream derived from the master seed."""
    out = []
    cells = itertools.product(true_hrs, target_censors, target_switches)
    for idx, (hr, cens, sw) in enumerate(cells):
        cell_seed = int(np.random.SeedSequence([seed, idx]).generate_state(1)[0])
        out.append(
            ScenarioConfig(
                n=n,
                true_hr=hr,
                target_censor=cens,
                target_switch=sw,
                seed=cell_seed,
                **scenario_kwargs,
            )
        )
    return out


def _run_replicate(cfg: ScenarioConfig, rep: int, methods: tuple[Method, ...]):
    dataset = generate(cfg, rep)
    fingerprint = dataset.fingerprint()
    cells = {}
    for method in methods:
        try:
            result = ADJUSTERS[method](dataset)
        except SwitchAdjustError as exc:
            cells[method] = (None, f"{type(exc).__name__}: {exc}")
            continue
        if _is_failure(result):
            cells[method] = (None, "non-convergence flagged in diagnostics")
        else:
            cells[method] = (result, "")
    return fingerprint, cells


def run_factorial(
    scenarios: Sequence[ScenarioConfig],
    methods: Sequence[Method] = SWEEP_METHODS,
    R: int = 500,
    seed: Optional[int] = None,
    parallelism: int = 1,
    return_estimates: bool = False,
):
    """Evaluate every (scenario, method) cell on the same R datasets per
    scenario.  Returns the MetricsRow list (scenario-major, method order as
    given); with return_estimates also the per-replicate audit records.

    seed = None keeps each scenario's own seed; an int re-derives per-scenario
    seeds from it, making the whole sweep a function of one number.
    """
    if R < 1:
        raise ConfigError("R must be >= 1")
    methods = tuple(methods)
    unknown = [m for m in methods if m not in ADJUSTERS]
    if unknown:
        raise ConfigError(f"unknown methods: {unknown}")
    scenarios = list(scenarios)
    if seed is not None:
        scenarios = [
            replace(s, seed=int(np.random.SeedSequence([seed, i]).generate_state(1)[0]))
            for i, s in enumerate(scenarios)
        ]
    for s in scenarios:
        calibrate(s)  # fail fast on infeasible targets, warm the parent cache

    metrics: list[MetricsRow] = []
    estimates: list[EstimateRecord] = []
    runner = Parallel(n_jobs=parallelism)
    for cfg in scenarios:
        replicates = runner(delayed(_run_replicate)(cfg, rep, methods) for rep in range(R))
        fingerprints = [fp for fp, _ in replicates]
        if len(set(fingerprints)) != len(fingerprints):
            raise ConfigError(
                f"replicate datasets collide for scenario seed {cfg.seed}; "
                "check the seed streams"
            )
        for method in methods:
            per_rep = [cells[method][0] for _, cells in replicates]
            if return_estimates:
                for rep, (fp, cells) in enumerate(replicates):
                    result, err = cells[method]
                    estimates.append(
                        EstimateRecord(
                            true_hr=cfg.true_hr,
                            target_censor=cfg.target_censor,
                            target_switch=cfg.target_switch,
                            replicate=rep,
                            fingerprint=fp,
                            method=method,
                            hr=None if result is None else result.hr,
                            ci_lo=None if result is None else result.ci95[0],
                            ci_hi=None if result is None else result.ci95[1],
                            error=err,
                        )
                    )
            try:
                metrics.append(
                    evaluate(per_rep, cfg.true_hr, cfg.target_censor, cfg.target_switch)
                )
            except AllReplicatesFailed:
                # cell-level failure: no row, the audit records still tell why
                continue
    if return_estimates:
        return metrics, estimates
    return metrics


def recommend(rows: Sequence[MetricsRow]) -> Method:
    """Recommended method for one scenario: smallest MSE, then smallest |bias|,
    then highest coverage."""
    if not rows:
        raise ConfigError("no rows to recommend from")
    cells = {(r.true_hr, r.target_censor, r.target_switch) for r in rows}
    if len(cells) > 1:
        raise ConfigError(f"rows span multiple scenarios: {sorted(cells)}")
    present = {r.method for r in rows}
    missing = [m.value for m in SWEEP_METHODS if m not in present]
    if missing:
        raise ConfigError(f"scenario is missing methods: {missing}")
    best = min(rows, key=lambda r: (r.mse, abs(r.bias), -r.coverage))
    return best.method
