"""Unadjusted comparators: ITT, exclude-switchers, censor-at-switch.

These deliberately keep their known biases; they exist as baselines for the
adjustment methods.
"""
from __future__ import annotations

import numpy as np

from ..data import Dataset
from ..errors import EmptyArmAfterExclusion, NoEventsAfterRecoding
from ..results import AdjustmentResult, Method
from ..survival import cox_fit


def _cox_result(method: Method, time, event, arm, weight=None, extra=None) -> AdjustmentResult:
    fit = cox_fit(time, event, arm, weight=weight)
    diagnostics = {
        "n": int(len(time)),
        "n_events": int(np.count_nonzero(event)),
        "log_hr": fit.log_hr,
        "se": fit.se,
    }
    if extra:
        diagnostics.update(extra)
    return AdjustmentResult(method=method, hr=fit.hr, ci95=fit.ci95, diagnostics=diagnostics)


def itt(d: Dataset) -> AdjustmentResult:
    """Cox fit of event times on randomized arm; switching ignored."""
    c = d.cols
    return _cox_result(Method.ITT, c.time, c.event, c.arm)


def exclude_switchers(d: Dataset) -> AdjustmentResult:
    """Cox fit after dropping every switcher from the dataset."""
    c = d.cols
    keep = np.isnan(c.switch_time)
    arms_kept = c.arm[keep]
    if not np.any(arms_kept == 0) or not np.any(arms_kept == 1):
        raise EmptyArmAfterExclusion("excluding switchers emptied an arm")
    return _cox_result(
        Method.EXCLUDE,
        c.time[keep],
        c.event[keep],
        arms_kept,
        extra={"n_excluded": int(np.count_nonzero(~keep))},
    )


def censor_at_switch(d: Dataset) -> AdjustmentResult:
    """Cox fit with switchers recoded as censored at their switch time."""
    c = d.cols
    switched = ~np.isnan(c.switch_time)
    time = np.where(switched, c.switch_time, c.time)
    event = np.where(switched, False, c.event)
    if not np.any(event):
        raise NoEventsAfterRecoding("no events remain after censoring at switch")
    return _cox_result(
        Method.CENSOR,
        time,
        event,
        c.arm,
        extra={"n_recoded": int(np.count_nonzero(switched))},
    )
