"""Counterfactual prediction with the regression forest.

Train on control-arm non-switchers (by default only those whose survival time
was observed as an event, since censored times understate the counterfactual
target), predict each switcher's counterfactual time from baseline covariates,
floor it just past the switch time, and run the ITT comparison on the blended
dataset.

Switchers keep their original event status at the predicted time: a point
prediction clusters near the training mean, and forcing every switcher to die
there concentrates the control arm's event mass into a narrow band, which
badly distorts the hazard ratio.  Carrying the censoring flag through keeps
roughly the right number of control events.  Set predictions_as_events on the
config to treat every prediction as an observed death instead.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..data import Dataset
from ..errors import InsufficientTraining
from ..forest import ForestConfig, forest_fit, forest_predict
from ..results import AdjustmentResult, Method
from ..survival import cox_fit

FLOOR_DAYS = 1.0


def _feature_matrix(c, mask):
    return np.column_stack([c.age[mask], c.ecog[mask], c.prior_lines[mask], c.risk_level[mask]])


def rf_adjust(d: Dataset, cfg: Optional[ForestConfig] = None) -> AdjustmentResult:
    """Random-forest counterfactual adjustment.

    Predicted switchers re-enter the analysis at max(prediction,
    switch.time + 1) with their original event status (all-events when
    cfg.predictions_as_events); treatment-arm and non-switcher records are
    never modified.
    """
    cfg = cfg or ForestConfig()
    c = d.cols
    switched = ~np.isnan(c.switch_time)
    control = c.arm == 0

    time = c.time.copy()
    event = c.event.copy()
    diagnostics: dict = {
        "n_train": 0,
        "oob_mse": None,
        "n_floored": 0,
        "n_trees": cfg.n_trees,
        "mtry": cfg.resolved_mtry(4),
        "min_leaf": cfg.min_leaf,
        "seed": cfg.seed,
    }
    if np.any(switched):
        train = control & ~switched
        if not cfg.include_censored_training:
            train &= c.event
        n_train = int(np.count_nonzero(train))
        if n_train < 2 * cfg.min_leaf:
            raise InsufficientTraining(
                f"{n_train} usable control non-switchers < 2 * min_leaf = {2 * cfg.min_leaf}"
            )
        forest = forest_fit(_feature_matrix(c, train), c.time[train], cfg)
        predicted = forest_predict(forest, _feature_matrix(c, switched))
        floor = c.switch_time[switched] + FLOOR_DAYS
        u_time = np.maximum(predicted, floor)
        time[switched] = u_time
        if cfg.predictions_as_events:
            event[switched] = True
        diagnostics.update(
            {
                "n_train": n_train,
                "oob_mse": forest.oob_mse,
                "n_floored": int(np.count_nonzero(predicted < floor)),
            }
        )

    fit = cox_fit(time, event, c.arm)
    diagnostics.update({"log_hr": fit.log_hr, "se": fit.se})
    return AdjustmentResult(method=Method.RF, hr=fit.hr, ci95=fit.ci95, diagnostics=diagnostics)
