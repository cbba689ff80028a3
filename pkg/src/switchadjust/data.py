"""Switching-annotated survival dataset: in-memory records and the CSV schema.

Every adjuster consumes exactly this shape.  Times are days, stored as 64-bit
floats; datasets are immutable after construction and safe for concurrent
reads.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import DataError, SchemaError

CSV_COLUMNS = [
    "id",
    "arm",
    "observed_time",
    "event",
    "censor_time",
    "age",
    "ecog",
    "prior_lines",
    "risk_level",
    "switch_time",
    "switch_level",
]

RISK_LEVELS = (0, 1, 2)


class Arm(Enum):
    CONTROL = "control"
    TREATMENT = "treatment"


@dataclass(frozen=True)
class Covariates:
    """Baseline covariates carried by every patient."""

    age: float
    ecog: float
    prior_lines: int
    risk_level: int


@dataclass(frozen=True)
class SwitchAnnotation:
    """Switch time (days) and destination level k; level 1 is the
    experimental-equivalent treatment."""

    time: float
    level: int


@dataclass(frozen=True)
class PatientRecord:
    id: str
    arm: Arm
    observed_time: float
    event: bool
    censor_time: float  # administrative horizon, kept even when the event was seen
    covariates: Covariates
    switch: Optional[SwitchAnnotation] = None


@dataclass(frozen=True, eq=False)
class ColumnView:
    """Column-oriented arrays over a dataset; switch_time is NaN and
    switch_level 0 for non-switchers."""

    time: np.ndarray
    event: np.ndarray
    arm: np.ndarray  # 0 control, 1 treatment
    censor: np.ndarray
    age: np.ndarray
    ecog: np.ndarray
    prior_lines: np.ndarray
    risk_level: np.ndarray
    switch_time: np.ndarray
    switch_level: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Ordered patient records plus the number of switch-destination levels."""

    patients: tuple[PatientRecord, ...]
    k_levels: int

    def __len__(self) -> int:
        return len(self.patients)

    @cached_property
    def cols(self) -> ColumnView:
        n = len(self.patients)
        out = {
            "time": np.empty(n),
            "event": np.empty(n, dtype=bool),
            "arm": np.empty(n, dtype=np.int64),
            "censor": np.empty(n),
            "age": np.empty(n),
            "ecog": np.empty(n),
            "prior_lines": np.empty(n),
            "risk_level": np.empty(n),
            "switch_time": np.full(n, np.nan),
            "switch_level": np.zeros(n, dtype=np.int64),
        }
        for i, p in enumerate(self.patients):
            out["time"][i] = p.observed_time
            out["event"][i] = p.event
            out["arm"][i] = 1 if p.arm is Arm.TREATMENT else 0
            out["censor"][i] = p.censor_time
            out["age"][i] = p.covariates.age
            out["ecog"][i] = p.covariates.ecog
            out["prior_lines"][i] = p.covariates.prior_lines
            out["risk_level"][i] = p.covariates.risk_level
            if p.switch is not None:
                out["switch_time"][i] = p.switch.time
                out["switch_level"][i] = p.switch.level
        return ColumnView(**out)

    def fingerprint(self) -> str:
        """Content hash used to assert that paired methods saw the same data."""
        import hashlib

        h = hashlib.sha256()
        for p in self.patients:
            sw = f"{p.switch.time!r},{p.switch.level}" if p.switch else ","
            h.update(
                f"{p.id}|{p.arm.value}|{p.observed_time!r}|{int(p.event)}|"
                f"{p.censor_time!r}|{p.covariates.age!r}|{p.covariates.ecog!r}|"
                f"{p.covariates.prior_lines}|{p.covariates.risk_level}|{sw}\n".encode()
            )
        return h.hexdigest()[:16]


def validate_record(p: PatientRecord, k_levels: int) -> None:
    rid = p.id
    if not np.isfinite(p.observed_time) or p.observed_time <= 0:
        raise DataError(f"row {rid}: observed_time must be a positive number")
    if not np.isfinite(p.censor_time) or p.censor_time <= 0:
        raise DataError(f"row {rid}: censor_time must be a positive number")
    if p.observed_time > p.censor_time * (1 + 1e-12):
        raise DataError(f"row {rid}: observed_time exceeds censor_time")
    if not p.event and abs(p.observed_time - p.censor_time) > 1e-9 * max(1.0, p.censor_time):
        raise DataError(f"row {rid}: censored rows must have observed_time == censor_time")
    cov = p.covariates
    if cov.age < 18:
        raise DataError(f"row {rid}: age below 18")
    if cov.ecog < 0:
        raise DataError(f"row {rid}: negative ECOG")
    if cov.prior_lines < 0:
        raise DataError(f"row {rid}: negative prior_lines")
    if cov.risk_level not in RISK_LEVELS:
        raise DataError(f"row {rid}: risk_level {cov.risk_level} outside {RISK_LEVELS}")
    if p.switch is not None:
        if p.arm is not Arm.CONTROL:
            raise DataError(f"row {rid}: switch annotation on a treatment-arm patient")
        if p.switch.time <= 0:
            raise DataError(f"row {rid}: switch_time must be positive")
        if p.switch.time >= p.observed_time:
            raise DataError(f"row {rid}: switch_time at or after observed_time")
        if p.switch.level < 1 or p.switch.level > k_levels:
            raise DataError(f"row {rid}: switch_level {p.switch.level} outside 1..{k_levels}")


def make_dataset(patients: Iterable[PatientRecord]) -> Dataset:
    """Build a validated Dataset; k_levels is the largest level present."""
    pats = tuple(patients)
    k_levels = max((p.switch.level for p in pats if p.switch is not None), default=0)
    for p in pats:
        validate_record(p, k_levels)
    return Dataset(patients=pats, k_levels=k_levels)


def split_exposure(p: PatientRecord) -> tuple[float, float]:
    """Split observed time into (control-exposure, treatment-exposure) days.

    Treatment-arm patients are exposed from randomization; control switchers
    from their switch time; the two parts always sum to observed_time.
    """
    if p.arm is Arm.TREATMENT:
        return 0.0, p.observed_time
    if p.switch is None:
        return p.observed_time, 0.0
    return p.switch.time, p.observed_time - p.switch.time


def _parse_float(raw: str, row_id: str, col: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"row {row_id}: column {col} is not a number: {raw!r}") from None


def _parse_int(raw: str, row_id: str, col: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise DataError(f"row {row_id}: column {col} is not an integer: {raw!r}") from None


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate a dataset from the documented CSV schema."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if header != CSV_COLUMNS:
            missing = [c for c in CSV_COLUMNS if c not in header]
            unknown = [c for c in header if c not in CSV_COLUMNS]
            raise SchemaError(
                f"{path}: header mismatch (missing {missing or 'none'}, "
                f"unknown {unknown or 'none'})"
            )
        patients = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise SchemaError(f"{path} line {lineno}: expected {len(CSV_COLUMNS)} fields")
            rec = dict(zip(CSV_COLUMNS, row))
            rid = rec["id"]
            try:
                arm = Arm(rec["arm"])
            except ValueError:
                raise DataError(f"row {rid}: unknown arm {rec['arm']!r}") from None
            if rec["event"] not in ("0", "1"):
                raise DataError(f"row {rid}: event must be 0 or 1")
            switch = None
            if rec["switch_time"] or rec["switch_level"]:
                if not (rec["switch_time"] and rec["switch_level"]):
                    raise DataError(f"row {rid}: switch_time and switch_level must come together")
                switch = SwitchAnnotation(
                    time=_parse_float(rec["switch_time"], rid, "switch_time"),
                    level=_parse_int(rec["switch_level"], rid, "switch_level"),
                )
            patients.append(
                PatientRecord(
                    id=rid,
                    arm=arm,
                    observed_time=_parse_float(rec["observed_time"], rid, "observed_time"),
                    event=rec["event"] == "1",
                    censor_time=_parse_float(rec["censor_time"], rid, "censor_time"),
                    covariates=Covariates(
                        age=_parse_float(rec["age"], rid, "age"),
                        ecog=_parse_float(rec["ecog"], rid, "ecog"),
                        prior_lines=_parse_int(rec["prior_lines"], rid, "prior_lines"),
                        risk_level=_parse_int(rec["risk_level"], rid, "risk_level"),
                    ),
                    switch=switch,
                )
            )
    return make_dataset(patients)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Serialize to the CSV schema; floats use repr so the round trip is exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for p in dataset.patients:
            writer.writerow(
                [
                    p.id,
                    p.arm.value,
                    repr(p.observed_time),
                    int(p.event),
                    repr(p.censor_time),
                    repr(p.covariates.age),
                    repr(p.covariates.ecog),
                    p.covariates.prior_lines,
                    p.covariates.risk_level,
                    repr(p.switch.time) if p.switch else "",
                    p.switch.level if p.switch else "",
                ]
            )
