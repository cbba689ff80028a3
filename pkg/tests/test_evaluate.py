"""Evaluation harness: per-cell metrics, factorial driver, recommendation."""
import numpy as np
import pytest

from switchadjust.errors import AllReplicatesFailed, ConfigError
from switchadjust.evaluate import (
    FACTORIAL_CENSOR,
    FACTORIAL_HRS,
    FACTORIAL_SWITCH,
    SWEEP_METHODS,
    MetricsRow,
    evaluate,
    factorial_scenarios,
    recommend,
    run_factorial,
)
from switchadjust.results import AdjustmentResult, Method


def res(hr, lo=None, hi=None, method=Method.ITT, converged=None):
    lo = hr * 0.8 if lo is None else lo
    hi = hr * 1.25 if hi is None else hi
    diag = {} if converged is None else {"converged": converged}
    return AdjustmentResult(method=method, hr=hr, ci95=(lo, hi), diagnostics=diag)


def test_perfect_estimator_metrics():
    rows = [res(0.6) for _ in range(10)]
    m = evaluate(rows, true_hr=0.6)
    assert m.bias == 0.0
    assert m.mse == 0.0
    assert m.coverage == 1.0
    assert m.n_reps_used == 10 and m.n_failures == 0
    assert m.mean_hr == 0.6


def test_two_point_bias_and_mse():
    rows = [res(0.5), res(0.7)]
    m = evaluate(rows, true_hr=0.6)
    assert m.bias == pytest.approx(0.0, abs=1e-15)
    assert m.mse == pytest.approx(0.01, abs=1e-15)
    assert m.mc_se_bias > 0.0


def test_bias_sign_convention():
    # estimates above the truth mean the method under-states the benefit and
    # the reported bias (truth minus mean estimate) goes negative
    m = evaluate([res(0.7), res(0.8)], true_hr=0.6)
    assert m.bias < 0.0
    assert m.bias == pytest.approx(0.6 - 0.75, abs=1e-15)


def test_coverage_counts_interval_hits():
    rows = [
        res(0.6, lo=0.5, hi=0.7),  # covers
        res(0.9, lo=0.8, hi=1.0),  # misses
        res(0.6, lo=0.6, hi=0.6),  # boundary counts as covered
        res(0.3, lo=0.2, hi=0.4),  # misses
    ]
    m = evaluate(rows, true_hr=0.6)
    assert m.coverage == 0.5


def test_failures_are_counted_not_imputed():
    rows = [res(0.6), None, res(0.62, converged=False), res(0.58)]
    m = evaluate(rows, true_hr=0.6)
    assert m.n_reps_used == 2
    assert m.n_failures == 2
    assert m.mean_hr == pytest.approx(0.59, abs=1e-12)


def test_all_failures_raises():
    with pytest.raises(AllReplicatesFailed):
        evaluate([None, None], true_hr=0.6)
    with pytest.raises(AllReplicatesFailed):
        evaluate([], true_hr=0.6)


def test_mixed_methods_rejected():
    rows = [res(0.6), res(0.6, method=Method.RPSFTM)]
    with pytest.raises(ConfigError, match="mixed methods"):
        evaluate(rows, true_hr=0.6)


def test_factorial_scenarios_grid():
    scen = factorial_scenarios(seed=0)
    assert len(scen) == 27
    combos = {(s.true_hr, s.target_censor, s.target_switch) for s in scen}
    assert len(combos) == 27
    assert {s.true_hr for s in scen} == set(FACTORIAL_HRS)
    assert {s.target_censor for s in scen} == set(FACTORIAL_CENSOR)
    assert {s.target_switch for s in scen} == set(FACTORIAL_SWITCH)
    # per-cell seeds distinct and reproducible
    seeds = [s.seed for s in scen]
    assert len(set(seeds)) == 27
    assert seeds == [s.seed for s in factorial_scenarios(seed=0)]
    assert seeds != [s.seed for s in factorial_scenarios(seed=1)]


def test_run_factorial_shape_and_determinism():
    scen = factorial_scenarios(seed=0)[:2]
    rows1 = run_factorial(scen, methods=(Method.ITT, Method.CENSOR), R=3)
    rows2 = run_factorial(scen, methods=(Method.ITT, Method.CENSOR), R=3)
    assert len(rows1) == 4  # 2 scenarios x 2 methods, scenario-major
    assert [r.method for r in rows1] == [Method.ITT, Method.CENSOR] * 2
    for a, b in zip(rows1, rows2):
        assert a == b
    assert all(r.n_reps_used + r.n_failures == 3 for r in rows1)


def test_run_factorial_reseeding_changes_results():
    scen = factorial_scenarios(seed=0)[:1]
    base = run_factorial(scen, methods=(Method.ITT,), R=3)
    reseeded = run_factorial(scen, methods=(Method.ITT,), R=3, seed=123)
    assert base[0].mean_hr != reseeded[0].mean_hr


def test_run_factorial_estimates_audit_trail():
    scen = factorial_scenarios(seed=0)[:1]
    rows, estimates = run_factorial(
        scen, methods=(Method.ITT, Method.RPSFTM), R=3, return_estimates=True
    )
    assert len(estimates) == 6
    fps = {e.fingerprint for e in estimates}
    assert len(fps) == 3  # one dataset per replicate, shared across methods
    for e in estimates:
        assert e.method in (Method.ITT, Method.RPSFTM)
        if e.hr is not None:
            assert e.ci_lo < e.hr < e.ci_hi
            assert e.error == ""


def test_run_factorial_validation():
    scen = factorial_scenarios(seed=0)[:1]
    with pytest.raises(ConfigError):
        run_factorial(scen, methods=(Method.ITT,), R=0)
    with pytest.raises(ConfigError):
        run_factorial(scen, methods=("not-a-method",), R=2)


def metrics_row(method, mse, bias, coverage):
    return MetricsRow(
        method=method,
        true_hr=0.6,
        target_censor=0.25,
        target_switch=0.5,
        bias=bias,
        mse=mse,
        coverage=coverage,
        n_reps_used=100,
        n_failures=0,
        mc_se_bias=0.01,
        mc_se_mse=0.001,
        mean_hr=0.6 - bias,
        mean_ci_lo=0.5,
        mean_ci_hi=0.7,
    )


def full_cell(**overrides):
    base = {
        Method.ITT: (0.020, -0.070, 0.80),
        Method.RPSFTM: (0.015, -0.004, 0.93),
        Method.IPE: (0.016, -0.006, 0.92),
        Method.CENSOR: (0.300, -0.500, 0.10),
        Method.IPCW: (0.310, -0.510, 0.09),
        Method.RF: (0.014, 0.020, 0.90),
        Method.STRAT_RPSFTM: (0.013, -0.010, 0.94),
    }
    base.update(overrides)
    return [metrics_row(m, *vals) for m, vals in base.items()]


def test_recommend_smallest_mse_wins():
    assert recommend(full_cell()) == Method.STRAT_RPSFTM


def test_recommend_breaks_mse_ties_by_bias_then_coverage():
    rows = full_cell(**{
        Method.RF: (0.013, 0.002, 0.90),
        Method.STRAT_RPSFTM: (0.013, -0.010, 0.94),
    })
    assert recommend(rows) == Method.RF  # same MSE, smaller |bias|
    rows = full_cell(**{
        Method.RF: (0.013, -0.010, 0.90),
        Method.STRAT_RPSFTM: (0.013, 0.010, 0.94),
    })
    assert recommend(rows) == Method.STRAT_RPSFTM  # |bias| tied, higher coverage


def test_recommend_requires_all_methods_and_one_scenario():
    rows = full_cell()
    with pytest.raises(ConfigError, match="missing methods"):
        recommend(rows[:-1])
    with pytest.raises(ConfigError, match="no rows"):
        recommend([])
    import dataclasses

    other = dataclasses.replace(metrics_row(Method.ITT, 0.5, 0.1, 0.5), true_hr=0.8)
    with pytest.raises(ConfigError, match="multiple scenarios"):
        recommend(rows + [other])
