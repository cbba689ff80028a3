"""Common result carrier returned by every adjustment method."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class Method(str, Enum):
    """Adjustment methods, keyed by their command-line codes."""

    ITT = "itt"
    EXCLUDE = "exclude"
    CENSOR = "censor"
    IPCW = "ipcw"
    RPSFTM = "rpsftm"
    IPE = "ipe"
    STRAT_RPSFTM = "srp"
    RF = "rf"


@dataclass(frozen=True)
class AdjustmentResult:
    """Hazard-ratio estimate with its Wald 95% interval and method diagnostics.

    `diagnostics` keys are method-specific but stable; see each method's
    docstring for the contract.
    """

    method: Method
    hr: float
    ci95: tuple[float, float]
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def as_row(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "hr": self.hr,
            "ci_lo": self.ci95[0],
            "ci_hi": self.ci95[1],
        }
