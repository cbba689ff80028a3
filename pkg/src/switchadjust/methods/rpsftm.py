"""RPSFTM and its stratified multi-level extension.

Counterfactual reconstruction: U = t_con + e^psi * t_trt, with re-censoring
U* = min(U, C, e^psi * C) applied to every patient with treatment exposure
(at that patient's own psi).  psi is estimated by g-estimation: the psi at
which a randomization-based log-rank statistic on counterfactual times is
closest to zero.

Level convention: switch level 1 is exposure equivalent to the experimental
arm and shares psi_0 with it; switch level l >= 2 maps to psi_{l-1}.  A config
with k_levels = K searches a (K+1)-dimensional grid.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..data import Dataset, PatientRecord, split_exposure
from ..errors import (
    ConfigError,
    EmptyInput,
    LevelCountExceeded,
    MissingLevelParameter,
    NoSolutionInRange,
)
from ..results import AdjustmentResult, Method
from ..survival import cox_fit
from .._kernels import logrank_oe_var

MAX_K = 3
BISECT_TOL = 1e-4


@dataclass(frozen=True)
class GEstimationConfig:
    """Grid-search settings for g-estimation.

    grid_step defaults to 0.01 for the scalar search and 0.025 per axis for
    the stratified one (left as None until resolved).  collapse_levels forces
    a single shared psi by running the scalar search path unchanged.
    """

    psi_min: float = -1.5
    psi_max: float = 0.5
    grid_step: Optional[float] = None
    recensor: bool = True
    k_levels: int = 0
    store_surface: bool = False
    collapse_levels: bool = False

    def __post_init__(self):
        if not self.psi_min < self.psi_max:
            raise ConfigError("psi_min must be < psi_max")
        if self.grid_step is not None:
            if self.grid_step <= 0:
                raise ConfigError("grid_step must be > 0")
            if self.grid_step >= self.psi_max - self.psi_min:
                raise ConfigError("grid_step must be smaller than the psi range")
        if self.k_levels < 0:
            raise ConfigError("k_levels must be >= 0")

    def resolved_step(self) -> float:
        if self.grid_step is not None:
            return self.grid_step
        return 0.01 if self.k_levels == 0 else 0.025


@dataclass(frozen=True)
class GEstimationResult:
    """psi_hat has K+1 entries; z_at_solution is the objective's value at it
    (signed log-rank z for the scalar search, chi-square for the stratified
    one).  objective_surface, when stored, is (points (N, K+1), values (N,))
    over every evaluated candidate."""

    psi_hat: tuple[float, ...]
    z_at_solution: float
    objective_surface: Optional[tuple[np.ndarray, np.ndarray]] = None


@dataclass(frozen=True)
class CounterfactualDataset:
    u_time: np.ndarray
    u_event: np.ndarray
    arm: np.ndarray


def counterfactual_time(p: PatientRecord, psi: Sequence[float], recensor: bool = True):
    """Counterfactual (u_time, u_event) for one patient.

    Control non-switchers are returned unchanged; exposed patients are scaled
    with psi[0] (treatment arm, level-1 switchers) or psi[level-1] and, if
    recensor, capped at min(C, e^psi * C) with the event flag cleared whenever
    the cap bites.
    """
    t_con, t_trt = split_exposure(p)
    if t_trt == 0.0 and p.arm.value == "control":
        return p.observed_time, p.event
    level = 1 if p.switch is None else p.switch.level
    idx = level - 1
    if idx >= len(psi):
        raise MissingLevelParameter(
            f"patient {p.id}: no psi entry for exposure level {level}"
        )
    af = float(np.exp(psi[idx]))
    u = t_con + af * t_trt
    if not recensor:
        return u, p.event
    cap = min(p.censor_time, af * p.censor_time)
    if u > cap:
        return cap, False
    return u, p.event


def _exposure_arrays(d: Dataset):
    c = d.cols
    switched = ~np.isnan(c.switch_time)
    treated = c.arm == 1
    t_con = np.where(treated, 0.0, np.where(switched, c.switch_time, c.time))
    t_trt = np.where(treated, c.time, np.where(switched, c.time - c.switch_time, 0.0))
    return switched, treated, t_con, t_trt


def _transform_block(t_con, t_trt, censor, event, psi, recensor):
    """Vectorized counterfactual for a block of exposed patients sharing psi."""
    af = np.exp(psi)
    u = t_con + af * t_trt
    if not recensor:
        return u, event.copy()
    cap = np.minimum(censor, af * censor)
    return np.minimum(u, cap), event & (u <= cap)


def _chi_sq(oe, V):
    sub_oe = oe[:-1]
    sub_V = V[:-1, :-1]
    try:
        sol = np.linalg.solve(sub_V, sub_oe)
    except np.linalg.LinAlgError:
        sol = np.linalg.pinv(sub_V) @ sub_oe
    return float(max(sub_oe @ sol, 0.0))


def _sorted_stats(u_t, u_e, codes, n_groups):
    order = np.argsort(u_t, kind="stable")
    return logrank_oe_var(
        u_t[order], np.ascontiguousarray(u_e[order]), codes[order], n_groups
    )


def _g_estimate_scalar(d: Dataset, cfg: GEstimationConfig) -> GEstimationResult:
    c = d.cols
    switched, treated, t_con, t_trt = _exposure_arrays(d)
    exposed = treated | switched
    codes = c.arm.astype(np.int64)
    event = c.event
    censor = c.censor

    def z_of(psi: float):
        u, e = _transform_block(t_con, t_trt, censor, event, psi, cfg.recensor)
        u_t = np.where(exposed, u, c.time)
        u_e = np.where(exposed, e, event)
        oe, V, n_ev = _sorted_stats(u_t, u_e, codes, 2)
        if n_ev == 0 or V[1, 1] <= 0:
            return 0.0, True
        return float(oe[1] / np.sqrt(V[1, 1])), False

    step = cfg.resolved_step()
    m = int(round((cfg.psi_max - cfg.psi_min) / step)) + 1
    grid = cfg.psi_min + step * np.arange(m)
    points = list(grid)
    zs = np.empty(m)
    degen = np.zeros(m, dtype=bool)
    for i, psi in enumerate(grid):
        zs[i], degen[i] = z_of(psi)
    obj = np.abs(zs)
    obj[degen] = np.inf
    if not np.isfinite(obj).any():
        raise NoSolutionInRange("every grid evaluation was degenerate (no events)")
    grid_best = int(np.argmin(obj))
    interior = np.flatnonzero(obj == obj[grid_best])
    if np.all((interior == 0) | (interior == m - 1)):
        raise NoSolutionInRange(
            f"objective minimized only at the grid boundary (psi = {grid[grid_best]:.6g})"
        )

    # refine by bisection at a sign change of z: the statistic is a step
    # function of psi, so the grid argmin can sit on a plateau far from the
    # actual crossing
    values = list(zs)
    flags = list(degen)
    psi_ref = None
    usable = ~degen
    nonzero = usable & (zs != 0.0)
    brackets = [
        (i, i + 1)
        for i in range(m - 1)
        if nonzero[i] and nonzero[i + 1] and np.sign(zs[i]) != np.sign(zs[i + 1])
    ]
    if brackets and not np.any(usable & (zs == 0.0)):
        lo_i, hi_i = min(
            brackets,
            key=lambda p: (
                min(abs(zs[p[0]]), abs(zs[p[1]])),
                abs(grid[p[0]] + grid[p[1]]) / 2.0,
                grid[p[0]],
            ),
        )
        lo, z_lo, hi, z_hi = grid[lo_i], zs[lo_i], grid[hi_i], zs[hi_i]
        while hi - lo > BISECT_TOL:
            mid = 0.5 * (lo + hi)
            z_mid, dg = z_of(mid)
            points.append(mid)
            values.append(z_mid)
            flags.append(dg)
            if dg or z_mid == 0.0:
                break
            if np.sign(z_mid) == np.sign(z_lo):
                lo, z_lo = mid, z_mid
            else:
                hi, z_hi = mid, z_mid
        psi_ref = 0.5 * (lo + hi)

    pts = np.array(points)
    vals = np.array(values)
    objective = np.abs(vals)
    objective[np.array(flags)] = np.inf
    ref = psi_ref if psi_ref is not None else 0.0
    best = min(
        range(len(pts)),
        key=lambda i: (objective[i], i in (0, m - 1), abs(pts[i] - ref), pts[i]),
    )
    psi_hat = float(pts[best])
    if best in (0, m - 1):  # bisection points are interior by construction
        raise NoSolutionInRange(
            f"objective minimized only at the grid boundary (psi = {psi_hat:.6g})"
        )
    surface = (pts.reshape(-1, 1), objective) if cfg.store_surface else None
    return GEstimationResult((psi_hat,), float(vals[best]), surface)


def _g_estimate_strata(d: Dataset, cfg: GEstimationConfig) -> GEstimationResult:
    k = cfg.k_levels
    n_levels = k + 1
    c = d.cols
    switched, treated, t_con, t_trt = _exposure_arrays(d)
    for level in range(1, n_levels + 1):
        if not np.any(switched & (c.switch_level == level)):
            raise EmptyInput(f"no switchers at level {level}; cannot estimate psi_{level - 1}")

    step = cfg.resolved_step()
    m = int(round((cfg.psi_max - cfg.psi_min) / step)) + 1
    grid = cfg.psi_min + step * np.arange(m)

    # group codes: 0 treatment, 1 control non-switchers, 1+l for level-l switchers
    n_groups = n_levels + 2
    tr = treated
    ns = (~treated) & (~switched)
    level_masks = [switched & (c.switch_level == level) for level in range(1, n_levels + 1)]

    # per-axis precomputed counterfactual blocks, sorted within block
    def block_per_value(mask):
        bt_con, bt_trt = t_con[mask], t_trt[mask]
        b_cens, b_ev = c.censor[mask], c.event[mask]
        out = []
        for psi in grid:
            u, e = _transform_block(bt_con, bt_trt, b_cens, b_ev, psi, cfg.recensor)
            o = np.argsort(u, kind="stable")
            out.append((u[o], e[o]))
        return out

    tr_blocks = block_per_value(tr)
    lvl_blocks = [block_per_value(mask) for mask in level_masks]
    static_t = c.time[ns]
    static_e = c.event[ns]
    o = np.argsort(static_t, kind="stable")
    static_t, static_e = static_t[o], static_e[o]

    codes = np.concatenate(
        [np.full(int(tr.sum()), 0, dtype=np.int64)]
        + [np.full(int(mk.sum()), 2 + l, dtype=np.int64) for l, mk in enumerate(level_masks)]
        + [np.full(int(ns.sum()), 1, dtype=np.int64)]
    )

    shape = tuple([m] * n_levels)
    obj = np.empty(shape)
    for idx in itertools.product(range(m), repeat=n_levels):
        blocks = [tr_blocks[idx[0]], lvl_blocks[0][idx[0]]]
        for axis in range(1, n_levels):
            blocks.append(lvl_blocks[axis][idx[axis]])
        u_t = np.concatenate([b[0] for b in blocks] + [static_t])
        u_e = np.concatenate([b[1] for b in blocks] + [static_e])
        order = np.argsort(u_t, kind="stable")
        oe, V, n_ev = logrank_oe_var(
            u_t[order], np.ascontiguousarray(u_e[order]), codes[order], n_groups
        )
        obj[idx] = _chi_sq(oe, V) if n_ev > 0 else np.inf
    if not np.isfinite(obj).any():
        raise NoSolutionInRange("every grid evaluation was degenerate (no events)")

    flat = obj.ravel()
    tied = np.flatnonzero(flat == flat.min())
    cands = [np.unravel_index(i, shape) for i in tied]
    interior = [t for t in cands if all(0 < i < m - 1 for i in t)]
    if not interior:
        worst = cands[0]
        psis = tuple(float(grid[i]) for i in worst)
        raise NoSolutionInRange(f"objective minimized only at a grid boundary (psi = {psis})")
    # ties broken by smallest Euclidean norm of the psi vector
    best = min(interior, key=lambda t: (float(sum(grid[i] ** 2 for i in t)), t))
    psi_hat = tuple(float(grid[i]) for i in best)
    surface = None
    if cfg.store_surface:
        mesh = np.meshgrid(*([grid] * n_levels), indexing="ij")
        pts = np.stack([mm.ravel() for mm in mesh], axis=1)
        surface = (pts, flat.copy())
    return GEstimationResult(psi_hat, float(obj[best]), surface)


def g_estimate(d: Dataset, cfg: GEstimationConfig) -> GEstimationResult:
    """Grid-search g-estimation of the acceleration parameters.

    k_levels = 0: scalar search on the 2-group log-rank z over randomized
    arms, refined by bisection between grid points bracketing a sign change.
    k_levels = K >= 1: pure grid search of the k-sample log-rank chi-square
    over treatment arm, per-level switcher strata and control non-switchers.
    A minimum attained only on the grid boundary raises NoSolutionInRange.
    """
    c = d.cols
    if not np.any(c.arm == 0) or not np.any(c.arm == 1):
        raise EmptyInput("g_estimate needs both arms nonempty")
    if cfg.k_levels == 0 or cfg.collapse_levels:
        return _g_estimate_scalar(d, cfg)
    return _g_estimate_strata(d, cfg)


def rebuild_dataset(d: Dataset, psi: Sequence[float], recensor: bool) -> CounterfactualDataset:
    """Observed data with ONLY control-arm switchers' (time, event) replaced by
    counterfactual values; level-l switchers use psi[l-1], clipped to the last
    entry when psi is scalar (common-effect rebuild)."""
    c = d.cols
    switched, _, t_con, t_trt = _exposure_arrays(d)
    u_time = c.time.copy()
    u_event = c.event.copy()
    psi = np.asarray(psi, dtype=float)
    idx = np.minimum(np.maximum(c.switch_level - 1, 0), psi.size - 1)
    for j in range(psi.size):
        mask = switched & (idx == j)
        if not np.any(mask):
            continue
        u, e = _transform_block(
            t_con[mask], t_trt[mask], c.censor[mask], c.event[mask], float(psi[j]), recensor
        )
        u_time[mask] = u
        u_event[mask] = e
    return CounterfactualDataset(u_time=u_time, u_event=u_event, arm=c.arm.copy())


def _final_result(method: Method, d: Dataset, est: GEstimationResult, cfg: GEstimationConfig):
    rebuilt = rebuild_dataset(d, est.psi_hat, cfg.recensor)
    fit = cox_fit(rebuilt.u_time, rebuilt.u_event, rebuilt.arm)
    diagnostics = {f"psi{i}": v for i, v in enumerate(est.psi_hat)}
    diagnostics.update(
        {
            "z_at_solution": est.z_at_solution,
            "grid_min": cfg.psi_min,
            "grid_max": cfg.psi_max,
            "grid_step": cfg.resolved_step(),
            "recensor": cfg.recensor,
            "log_hr": fit.log_hr,
            "se": fit.se,
            "n_events": int(np.count_nonzero(rebuilt.u_event)),
        }
    )
    return AdjustmentResult(method=method, hr=fit.hr, ci95=fit.ci95, diagnostics=diagnostics)


def rpsftm(d: Dataset, cfg: Optional[GEstimationConfig] = None) -> AdjustmentResult:
    """Plain RPSFTM: scalar g-estimation, common psi for every switcher."""
    cfg = cfg or GEstimationConfig()
    if cfg.k_levels != 0:
        raise ConfigError("rpsftm requires k_levels = 0; use stratified_rpsftm")
    est = g_estimate(d, cfg)
    return _final_result(Method.RPSFTM, d, est, cfg)


def stratified_rpsftm(d: Dataset, cfg: Optional[GEstimationConfig] = None) -> AdjustmentResult:
    """Stratified RPSFTM: one acceleration parameter per switch level.

    With no levels beyond the experimental-equivalent one (or no switchers at
    all) the search degenerates to the scalar path, making the method collapse
    to plain RPSFTM exactly.
    """
    if cfg is None:
        cfg = GEstimationConfig(k_levels=max(d.k_levels - 1, 0))
    if cfg.k_levels > MAX_K:
        raise LevelCountExceeded(f"k_levels = {cfg.k_levels} exceeds the supported maximum {MAX_K}")
    if not cfg.collapse_levels and d.k_levels > cfg.k_levels + 1:
        raise ConfigError(
            f"dataset has switch levels up to {d.k_levels} but k_levels = {cfg.k_levels} "
            f"covers only levels 1..{cfg.k_levels + 1}"
        )
    if cfg.k_levels == 0 or cfg.collapse_levels:
        scalar_cfg = replace(cfg, k_levels=0, collapse_levels=False)
        est = g_estimate(d, scalar_cfg)
        return _final_result(Method.STRAT_RPSFTM, d, est, scalar_cfg)
    est = g_estimate(d, cfg)
    return _final_result(Method.STRAT_RPSFTM, d, est, cfg)
