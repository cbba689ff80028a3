"""From-scratch survival kernels shared by every adjuster.

Kaplan-Meier, (weighted) log-rank, weighted Cox proportional hazards for a
single binary group covariate, and Weibull AFT maximum likelihood.  All
kernels are pure functions of arrays and safe to call concurrently.

Conventions fixed here and relied on everywhere else:
  * Cox ties use the Breslow approximation; log-rank pools tied events in one
    risk set.
  * Weighted fits report the naive model-based standard error (inverse
    observed information), not a sandwich estimator.
  * 95% intervals are Wald on the log scale with multiplier 1.96.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateRiskSet, EmptyInput, NonConvergence

Z95 = 1.959963984540054  # standard normal 97.5% quantile


@dataclass(frozen=True)
class SurvSample:
    """One observation: follow-up time, event flag, group label, weight."""

    time: float
    event: bool
    group: int = 0
    weight: float = 1.0


def as_arrays(samples: Sequence[SurvSample]):
    """Unpack a sample sequence into (time, event, group, weight) arrays."""
    t = np.array([s.time for s in samples], dtype=float)
    e = np.array([s.event for s in samples], dtype=bool)
    g = np.array([s.group for s in samples], dtype=np.int64)
    w = np.array([s.weight for s in samples], dtype=float)
    return t, e, g, w


def _check_inputs(time, event, weight):
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    if time.size == 0:
        raise EmptyInput("no samples")
    if np.any(~np.isfinite(time)) or np.any(time <= 0):
        raise EmptyInput("times must be finite and positive")
    if weight is None:
        weight = np.ones_like(time)
    else:
        weight = np.asarray(weight, dtype=float)
        if np.any(weight < 0) or np.any(~np.isfinite(weight)):
            raise EmptyInput("weights must be finite and nonnegative")
    return time, event, weight


class KaplanMeierCurve:
    """Right-continuous nonincreasing step function with S(0) = 1."""

    def __init__(self, times: np.ndarray, survival: np.ndarray):
        self.times = times
        self.survival = survival

    def __call__(self, t):
        idx = np.searchsorted(self.times, t, side="right")
        vals = np.concatenate([[1.0], self.survival])
        return vals[idx]

    def steps(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.survival.tolist()))


def kaplan_meier(time, event, weight=None) -> KaplanMeierCurve:
    """Weighted product-limit estimator.

    Risk sets and event counts are weight sums, so duplicating every sample or
    scaling all weights leaves the curve unchanged.
    """
    time, event, weight = _check_inputs(time, event, weight)
    order = np.argsort(time, kind="stable")
    t, e, w = time[order], event[order], weight[order]
    total = w.sum()
    # boundaries of tied-time runs
    firsts = np.flatnonzero(np.r_[True, t[1:] != t[:-1]])
    d = np.add.reduceat(np.where(e, w, 0.0), firsts)
    removed = np.add.reduceat(w, firsts)
    at_risk = total - np.concatenate([[0.0], np.cumsum(removed)[:-1]])
    has_event = d > 0
    tj, dj, nj = t[firsts][has_event], d[has_event], at_risk[has_event]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(nj > 0, dj / nj, 1.0)
    surv = np.cumprod(1.0 - frac)
    return KaplanMeierCurve(times=tj, survival=surv)


@dataclass(frozen=True)
class LogRankResult:
    z: float  # signed 2-group statistic; negative when group 1 has fewer events than expected
    chi_sq: float
    df: int
    degenerate: bool = False  # no events anywhere; chi_sq forced to 0


def _logrank_accumulate(t, e, g, w, n_groups):
    """Observed-minus-expected vector and its covariance over pooled risk sets."""
    order = np.argsort(t, kind="stable")
    t, e, g, w = t[order], e[order], g[order], w[order]
    onehot = np.zeros((t.size, n_groups))
    onehot[np.arange(t.size), g] = w
    firsts = np.flatnonzero(np.r_[True, t[1:] != t[:-1]])
    d_g = np.add.reduceat(np.where(e[:, None], onehot, 0.0), firsts, axis=0)
    removed_g = np.add.reduceat(onehot, firsts, axis=0)
    totals = onehot.sum(axis=0)
    n_g = totals[None, :] - np.concatenate(
        [np.zeros((1, n_groups)), np.cumsum(removed_g, axis=0)[:-1]], axis=0
    )
    d_tot = d_g.sum(axis=1)
    n_tot = n_g.sum(axis=1)
    keep = (d_tot > 0) & (n_tot > 0)
    d_g, n_g, d_tot, n_tot = d_g[keep], n_g[keep], d_tot[keep], n_tot[keep]
    p = n_g / n_tot[:, None]
    oe = (d_g - d_tot[:, None] * p).sum(axis=0)
    denom = np.maximum(n_tot - 1.0, np.finfo(float).tiny)
    f = np.where(n_tot > 1.0, d_tot * (n_tot - d_tot) / denom, 0.0)
    cov = np.einsum("j,jg,jh->gh", f, p, p)
    diag = np.einsum("j,jg->g", f, p)
    V = np.diag(diag) - cov
    return oe, V, float(d_tot.sum())


def log_rank(time, event, group, weight=None) -> LogRankResult:
    """(Weighted) log-rank test for two or more groups.

    Two-group calls also return the signed standardized statistic z based on
    group 1's observed-minus-expected events.
    """
    time, event, weight = _check_inputs(time, event, weight)
    group = np.asarray(group)
    labels, g = np.unique(group, return_inverse=True)
    n_groups = labels.size
    if n_groups < 2:
        raise EmptyInput("log_rank needs at least 2 groups")
    oe, V, events_total = _logrank_accumulate(time, event, g, weight, n_groups)
    df = n_groups - 1
    if events_total == 0:
        return LogRankResult(z=0.0, chi_sq=0.0, df=df, degenerate=True)
    sub_oe, sub_V = oe[:-1], V[:-1, :-1]
    try:
        sol = np.linalg.solve(sub_V, sub_oe)
    except np.linalg.LinAlgError:
        sol = np.linalg.pinv(sub_V) @ sub_oe
    chi_sq = float(max(sub_oe @ sol, 0.0))
    z = 0.0
    if n_groups == 2:
        v11 = V[1, 1]
        z = float(oe[1] / np.sqrt(v11)) if v11 > 0 else 0.0
        chi_sq = float(oe[1] ** 2 / v11) if v11 > 0 else 0.0
    return LogRankResult(z=z, chi_sq=chi_sq, df=df)


@dataclass(frozen=True)
class CoxFit:
    log_hr: float
    se: float
    hr: float
    ci95: tuple[float, float]
    iterations: int
    converged: bool
    loglik: float


def _binary_groups(group):
    group = np.asarray(group)
    labels = np.unique(group)
    if labels.size != 2:
        raise EmptyInput(f"expected exactly 2 groups, found {labels.size}")
    return (group == labels[1]).astype(float)


def _cox_quantities(beta, t_sorted, e_sorted, x_sorted, w_sorted, firsts):
    """Weighted Breslow partial log-likelihood, score and information at beta."""
    r = w_sorted * np.exp(beta * x_sorted)
    # suffix sums: risk-set aggregates at each unique time
    s0_all = np.cumsum(r[::-1])[::-1]
    s1_all = np.cumsum((r * x_sorted)[::-1])[::-1]
    s0 = s0_all[firsts]
    s1 = s1_all[firsts]
    we = np.where(e_sorted, w_sorted, 0.0)
    dw = np.add.reduceat(we, firsts)
    dwx = np.add.reduceat(we * x_sorted, firsts)
    keep = dw > 0
    s0, s1, dw, dwx = s0[keep], s1[keep], dw[keep], dwx[keep]
    xbar = s1 / s0
    loglik = float(np.sum(dwx * beta) - np.sum(dw * np.log(s0)))
    score = float(np.sum(dwx - dw * xbar))
    info = float(np.sum(dw * (xbar - xbar**2)))  # binary covariate: S2 == S1
    return loglik, score, info


def cox_fit(time, event, group, weight=None, max_iter: int = 50) -> CoxFit:
    """Weighted Cox PH fit for one binary group covariate via Newton-Raphson.

    Raises NonConvergence on monotone likelihood (separation) or when the
    iteration cap is hit; results are never silently clipped.
    """
    time, event, weight = _check_inputs(time, event, weight)
    x = _binary_groups(group)
    if not np.any(event & (weight > 0)):
        raise EmptyInput("cox_fit needs at least one weighted event")
    order = np.argsort(time, kind="stable")
    t, e, xs, w = time[order], event[order], x[order], weight[order]
    firsts = np.flatnonzero(np.r_[True, t[1:] != t[:-1]])

    beta = 0.0
    loglik, score, info = _cox_quantities(beta, t, e, xs, w, firsts)
    iterations = 0
    converged = False
    # the loglik comparison must be relative: near the optimum the true
    # improvement is far below float noise at |loglik| ~ n
    ll_slack = 1e-10 * max(1.0, abs(loglik))
    for _ in range(max_iter):
        if info <= 0:
            raise NonConvergence("cox_fit: information vanished (degenerate risk sets)")
        if abs(score) < 1e-9 * max(1.0, info):
            converged = True
            break
        step = score / info
        new_beta = beta + step
        new_ll, new_score, new_info = _cox_quantities(new_beta, t, e, xs, w, firsts)
        halvings = 0
        while new_ll < loglik - ll_slack and halvings < 30:
            step *= 0.5
            new_beta = beta + step
            new_ll, new_score, new_info = _cox_quantities(new_beta, t, e, xs, w, firsts)
            halvings += 1
        beta, loglik, score, info = new_beta, new_ll, new_score, new_info
        iterations += 1
        if abs(beta) > 15.0:
            raise NonConvergence(
                "cox_fit: |log HR| diverged (monotone likelihood / separation)"
            )
        if abs(step) < 1e-10 * max(1.0, abs(beta)):
            converged = True
            break
    if not converged and abs(score) >= 1e-9 * max(1.0, info):
        raise NonConvergence(f"cox_fit: no convergence in {max_iter} iterations")

    if info <= 0:
        raise NonConvergence("cox_fit: singular information at solution")
    se = float(1.0 / np.sqrt(info))
    hr = float(np.exp(beta))
    ci = (float(np.exp(beta - Z95 * se)), float(np.exp(beta + Z95 * se)))
    return CoxFit(
        log_hr=float(beta),
        se=se,
        hr=hr,
        ci95=ci,
        iterations=iterations,
        converged=True,
        loglik=loglik,
    )


@dataclass(frozen=True)
class WeibullAftFit:
    intercept: float
    coef_treatment: float  # log time-ratio for the group covariate
    scale: float
    loglik: float
    converged: bool
    se_coef: float = float("nan")  # inf flags an unidentifiable (constant) covariate


def _weibull_ll_grad_hess(theta, logt, delta, x):
    # trial steps can wander into extreme log-scale regions before halving
    # rejects them; overflow there is expected and harmless
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        mu, beta, eta = theta
        sigma = np.exp(eta)
        z = (logt - mu - beta * x) / sigma
        b = np.exp(np.clip(z, -700, 700))
        a = delta - b
        ll = float(np.sum(delta * (-eta - logt + z) - b))
        d_mu = -a.sum() / sigma
        d_beta = -(a * x).sum() / sigma
        d_eta = -(a * z).sum() - delta.sum()
        grad = np.array([d_mu, d_beta, d_eta])
        h_mm = -b.sum() / sigma**2
        h_mb = -(b * x).sum() / sigma**2
        h_bb = -(b * x * x).sum() / sigma**2
        h_me = (a.sum() - (b * z).sum()) / sigma
        h_be = ((a * x).sum() - (b * z * x).sum()) / sigma
        h_ee = (a * z).sum() - (b * z * z).sum()
        hess = np.array([[h_mm, h_mb, h_me], [h_mb, h_bb, h_be], [h_me, h_be, h_ee]])
    return ll, grad, hess


def weibull_aft_fit(time, event, group, max_iter: int = 100, tol: float = 1e-8) -> WeibullAftFit:
    """Weibull AFT maximum likelihood: log T = intercept + coef * group + scale * G
    with G standard minimum-Gumbel; censored rows contribute the survival term.

    A constant group covariate yields an intercept-only fit with coef 0 and
    se_coef flagged infinite.
    """
    time, event, weight = _check_inputs(time, event, None)
    group = np.asarray(group)
    labels = np.unique(group)
    if labels.size > 2:
        raise EmptyInput("weibull_aft_fit supports at most 2 groups")
    identified = labels.size == 2
    x = (group == labels[-1]).astype(float) if identified else np.zeros_like(time)
    if identified:
        for lab in labels:
            if not np.any(event & (group == lab)):
                raise NonConvergence(f"weibull_aft_fit: no events in group {lab}")
    elif not np.any(event):
        raise NonConvergence("weibull_aft_fit: no events")

    logt = np.log(time)
    delta = event.astype(float)
    ev_logt = logt[event]
    mu0 = float(ev_logt.mean())
    sigma0 = float(max(ev_logt.std(), 0.1)) if ev_logt.size > 1 else 1.0
    theta = np.array([mu0, 0.0, np.log(sigma0)])
    free = [0, 1, 2] if identified else [0, 2]

    ll, grad, hess = _weibull_ll_grad_hess(theta, logt, delta, x)
    gtol = 1e-8 * max(1.0, float(delta.sum()))
    converged = False
    for _ in range(max_iter):
        g_f = grad[free]
        if np.max(np.abs(g_f)) < gtol:
            converged = True
            break
        h_f = hess[np.ix_(free, free)]
        try:
            step = np.linalg.solve(h_f, -g_f)
        except np.linalg.LinAlgError:
            step = g_f
        if not np.all(np.isfinite(step)) or float(np.dot(step, g_f)) <= 0.0:
            # indefinite Hessian: the Newton direction descends, follow the
            # gradient instead (step halving handles the scale)
            step = g_f / max(1.0, float(np.linalg.norm(g_f)))
        new_theta = theta.copy()
        new_theta[free] += step
        new_ll, new_grad, new_hess = _weibull_ll_grad_hess(new_theta, logt, delta, x)
        halvings = 0
        ll_slack = 1e-12 * max(1.0, abs(ll))
        while (not np.isfinite(new_ll) or new_ll < ll - ll_slack) and halvings < 40:
            step *= 0.5
            new_theta = theta.copy()
            new_theta[free] += step
            new_ll, new_grad, new_hess = _weibull_ll_grad_hess(new_theta, logt, delta, x)
            halvings += 1
        improved = new_ll - ll
        theta, ll, grad, hess = new_theta, new_ll, new_grad, new_hess
        if abs(improved) < tol and np.max(np.abs(grad[free])) < 1e-5 * max(1.0, float(delta.sum())):
            converged = True
            break
    if not converged:
        raise NonConvergence(f"weibull_aft_fit: no convergence in {max_iter} iterations")

    mu, beta, eta = theta
    se_coef = float("inf")
    if identified:
        try:
            cov = np.linalg.inv(-hess)
            se_coef = float(np.sqrt(max(cov[1, 1], 0.0)))
        except np.linalg.LinAlgError:
            se_coef = float("inf")
    return WeibullAftFit(
        intercept=float(mu),
        coef_treatment=float(beta) if identified else 0.0,
        scale=float(np.exp(eta)),
        loglik=ll,
        converged=True,
        se_coef=se_coef,
    )
