"""From-scratch bagged CART regression forest.

Trees are stored as flat parallel arrays (split feature, threshold, child
indices, node value), one row per tree; -1 in the feature array marks a leaf.
Tree k's RNG is seeded from (cfg.seed, k), so results are bitwise reproducible
and independent of build order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConfigError, FeatureMismatch, InsufficientTraining

_NO_DEPTH_LIMIT = 2**31


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: Optional[int] = None  # ceil(p / 3) when None
    min_leaf: int = 5
    max_depth: Optional[int] = None  # unlimited when None
    seed: int = 0
    include_censored_training: bool = False  # used by rf_adjust, not forest_fit
    predictions_as_events: bool = False  # used by rf_adjust, not forest_fit

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")

    def resolved_mtry(self, p: int) -> int:
        if self.mtry is None:
            return int(np.ceil(p / 3))
        if self.mtry > p:
            raise ConfigError(f"mtry = {self.mtry} exceeds feature count {p}")
        return self.mtry


@dataclass(frozen=True)
class RegressionForest:
    features: np.ndarray  # (n_trees, max_nodes) split feature, -1 for leaves
    thresholds: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    values: np.ndarray
    node_counts: np.ndarray
    n_features: int
    target_range: tuple[float, float]
    oob_mse: float  # nan when no row was ever out-of-bag

    @property
    def n_trees(self) -> int:
        return int(self.features.shape[0])


def _tree_seeds(seed: int, n_trees: int) -> np.ndarray:
    return np.array(
        [np.random.SeedSequence([seed, k]).generate_state(1)[0] for k in range(n_trees)],
        dtype=np.int64,
    )


def forest_fit(features, targets, cfg: Optional[ForestConfig] = None) -> RegressionForest:
    """Fit the bagged forest: same-size bootstrap per tree, variance-reduction
    splits over a random mtry-subset of features per node, leaf means."""
    cfg = cfg or ForestConfig()
    X = np.ascontiguousarray(features, dtype=float)
    y = np.ascontiguousarray(targets, dtype=float)
    if X.ndim != 2:
        raise FeatureMismatch("features must be a 2-D matrix")
    if y.shape != (X.shape[0],):
        raise FeatureMismatch("targets must align with feature rows")
    if X.shape[0] < 2 * cfg.min_leaf:
        raise InsufficientTraining(
            f"{X.shape[0]} training rows < 2 * min_leaf = {2 * cfg.min_leaf}"
        )
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise InsufficientTraining("targets must be finite and positive")
    if not np.all(np.isfinite(X)):
        raise InsufficientTraining("features must be finite")

    p = X.shape[1]
    mtry = cfg.resolved_mtry(p)
    depth_cap = cfg.max_depth if cfg.max_depth is not None else _NO_DEPTH_LIMIT
    seeds = _tree_seeds(cfg.seed, cfg.n_trees)
    feat, thr, lefts, rights, values, counts, oob_sum, oob_cnt = _kernels.build_forest(
        X, y, cfg.n_trees, mtry, cfg.min_leaf, depth_cap, seeds
    )
    seen = oob_cnt > 0
    if np.any(seen):
        resid = oob_sum[seen] / oob_cnt[seen] - y[seen]
        oob_mse = float(np.mean(resid**2))
    else:
        oob_mse = float("nan")
    return RegressionForest(
        features=feat,
        thresholds=thr,
        lefts=lefts,
        rights=rights,
        values=values,
        node_counts=counts,
        n_features=p,
        target_range=(float(y.min()), float(y.max())),
        oob_mse=oob_mse,
    )


def forest_predict(f: RegressionForest, row):
    """Ensemble-mean prediction for one feature row or a matrix of rows."""
    X = np.ascontiguousarray(row, dtype=float)
    single = X.ndim == 1
    if single:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != f.n_features:
        raise FeatureMismatch(
            f"expected {f.n_features} features, got shape {np.shape(row)}"
        )
    out = _kernels.forest_predict_matrix(
        f.features, f.thresholds, f.lefts, f.rights, f.values, X
    )
    return float(out[0]) if single else out
