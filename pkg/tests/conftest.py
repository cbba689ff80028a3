"""Shared builders for hand-constructed datasets, plus the acceptance-line
summary hook: every acceptance test records one PASS/FAIL line and the hook
prints them all at the end of the run regardless of capture settings."""
from __future__ import annotations

from switchadjust.data import (
    Arm,
    Covariates,
    PatientRecord,
    SwitchAnnotation,
    make_dataset,
)

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE CRITERION {number:02d}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


def pat(
    pid: str,
    arm: str,
    time: float,
    event: bool = True,
    censor: float | None = None,
    switch: tuple[float, int] | None = None,
    age: float = 60.0,
    ecog: float = 1.0,
    prior_lines: int = 1,
    risk_level: int = 1,
) -> PatientRecord:
    """One patient with sane defaults.

    censor defaults to the observed time for censored rows (required by
    validation) and to twice the observed time for event rows.
    """
    if censor is None:
        censor = float(time) if not event else float(time) * 2.0
    annotation = None
    if switch is not None:
        annotation = SwitchAnnotation(time=float(switch[0]), level=int(switch[1]))
    return PatientRecord(
        id=pid,
        arm=Arm(arm),
        observed_time=float(time),
        event=event,
        censor_time=float(censor),
        covariates=Covariates(
            age=age, ecog=ecog, prior_lines=prior_lines, risk_level=risk_level
        ),
        switch=annotation,
    )


def two_arm_dataset(control_times, treatment_times):
    """All-event two-arm dataset from two lists of times."""
    rows = [pat(f"C{i:02d}", "control", t) for i, t in enumerate(control_times)]
    rows += [pat(f"T{i:02d}", "treatment", t) for i, t in enumerate(treatment_times)]
    return make_dataset(rows)
