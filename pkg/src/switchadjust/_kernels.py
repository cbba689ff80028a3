"""Jitted hot loops: pooled log-rank accumulation for g-estimation grids and
CART growth for the regression forest.

Everything here is an internal numeric kernel.  The public, numpy-only
implementations in `survival` stay the reference; tests assert the two routes
agree to float precision.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def logrank_oe_var(t, e, g, n_groups):
    """O-E vector, covariance matrix and total event count over pooled risk
    sets.  `t` must be sorted ascending; `g` holds 0-based group codes."""
    n = t.size
    counts = np.zeros(n_groups)
    for i in range(n):
        counts[g[i]] += 1.0
    oe = np.zeros(n_groups)
    V = np.zeros((n_groups, n_groups))
    d = np.zeros(n_groups)
    events_total = 0.0
    i = 0
    while i < n:
        j = i
        t0 = t[i]
        dtot = 0.0
        for a in range(n_groups):
            d[a] = 0.0
        while j < n and t[j] == t0:
            if e[j]:
                d[g[j]] += 1.0
                dtot += 1.0
            j += 1
        if dtot > 0.0:
            events_total += dtot
            ntot = 0.0
            for a in range(n_groups):
                ntot += counts[a]
            if ntot > 1.0:
                f = dtot * (ntot - dtot) / (ntot - 1.0)
                for a in range(n_groups):
                    pa = counts[a] / ntot
                    oe[a] += d[a] - dtot * pa
                    V[a, a] += f * pa * (1.0 - pa)
                    for b in range(a + 1, n_groups):
                        pb = counts[b] / ntot
                        V[a, b] -= f * pa * pb
                        V[b, a] = V[a, b]
        for k in range(i, j):
            counts[g[k]] -= 1.0
        i = j
    return oe, V, events_total


@njit(cache=True)
def _tree_predict_row(feature, threshold, left, right, value, row):
    node = 0
    while feature[node] >= 0:
        if row[feature[node]] <= threshold[node]:
            node = left[node]
        else:
            node = right[node]
    return value[node]


@njit(cache=True)
def _grow_tree(X, y, idx, mtry, min_leaf, max_depth, feature, threshold, left, right, value):
    """Grow one CART regression tree on rows `idx`; returns the node count.

    Splits minimize the summed within-child squared error; candidate features
    are a fresh random draw of `mtry` columns at every node.
    """
    p = X.shape[1]
    m0 = idx.size
    work = idx.copy()
    buf = np.empty(m0, dtype=np.int64)
    perm = np.empty(p, dtype=np.int64)
    # stack of pending nodes: [start, end, parent, is_left, depth]
    cap = 2 * m0 + 2
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_parent = np.empty(cap, dtype=np.int64)
    st_isleft = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_start[top], st_end[top], st_parent[top], st_isleft[top], st_depth[top] = 0, m0, -1, 0, 0
    top += 1
    n_nodes = 0
    while top > 0:
        top -= 1
        s, epos, parent, isleft = st_start[top], st_end[top], st_parent[top], st_isleft[top]
        depth = st_depth[top]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if isleft == 1:
                left[parent] = node
            else:
                right[parent] = node
        m = epos - s
        sy = 0.0
        sy2 = 0.0
        for k in range(s, epos):
            yv = y[work[k]]
            sy += yv
            sy2 += yv * yv
        mean = sy / m
        feature[node] = -1
        value[node] = mean
        sse_total = sy2 - sy * sy / m
        if m < 2 * min_leaf or sse_total <= 1e-12 or depth >= max_depth:
            continue
        for f in range(p):
            perm[f] = f
        best_cost = np.inf
        best_f = -1
        best_thr = 0.0
        for draw in range(mtry):
            pick = draw + np.random.randint(0, p - draw)
            tmp = perm[draw]
            perm[draw] = perm[pick]
            perm[pick] = tmp
            f = perm[draw]
            xv = np.empty(m)
            yv = np.empty(m)
            for k in range(m):
                xv[k] = X[work[s + k], f]
            order = np.argsort(xv)
            for k in range(m):
                yv[k] = y[work[s + order[k]]]
            xv = xv[order]
            cy = 0.0
            cy2 = 0.0
            for spos in range(1, m - min_leaf + 1):
                yk = yv[spos - 1]
                cy += yk
                cy2 += yk * yk
                if spos < min_leaf or xv[spos - 1] >= xv[spos]:
                    continue
                sse_l = cy2 - cy * cy / spos
                sy_r = sy - cy
                sse_r = (sy2 - cy2) - sy_r * sy_r / (m - spos)
                cost = sse_l + sse_r
                if cost < best_cost:
                    best_cost = cost
                    best_f = f
                    thr = xv[spos - 1] + 0.5 * (xv[spos] - xv[spos - 1])
                    if thr >= xv[spos]:
                        thr = xv[spos - 1]
                    best_thr = thr
        if best_f < 0:
            continue
        feature[node] = best_f
        threshold[node] = best_thr
        nl = 0
        nr = 0
        for k in range(s, epos):
            if X[work[k], best_f] <= best_thr:
                buf[nl] = work[k]
                nl += 1
            else:
                buf[m0 - 1 - nr] = work[k]
                nr += 1
        for k in range(nl):
            work[s + k] = buf[k]
        for k in range(nr):
            # reverse back so the right child keeps row order
            work[s + nl + k] = buf[m0 - 1 - (nr - 1 - k)]
        # push right first so the left child is grown (numbered) first
        st_start[top], st_end[top], st_parent[top], st_isleft[top], st_depth[top] = (
            s + nl, epos, node, 0, depth + 1,
        )
        top += 1
        st_start[top], st_end[top], st_parent[top], st_isleft[top], st_depth[top] = (
            s, s + nl, node, 1, depth + 1,
        )
        top += 1
    return n_nodes


@njit(cache=True)
def build_forest(X, y, n_trees, mtry, min_leaf, max_depth, seeds):
    """Bootstrap-aggregated regression trees with out-of-bag accumulation.

    `seeds[k]` reseeds the RNG before tree k, so any single tree can be
    rebuilt in isolation and the ensemble is order-independent.
    """
    n = X.shape[0]
    max_nodes = 2 * n + 1
    features = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    thresholds = np.zeros((n_trees, max_nodes))
    lefts = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    rights = np.full((n_trees, max_nodes), -1, dtype=np.int64)
    values = np.zeros((n_trees, max_nodes))
    node_counts = np.zeros(n_trees, dtype=np.int64)
    oob_sum = np.zeros(n)
    oob_cnt = np.zeros(n)
    inbag = np.zeros(n, dtype=np.bool_)
    for k in range(n_trees):
        np.random.seed(seeds[k])
        idx = np.random.randint(0, n, n)
        n_nodes = _grow_tree(
            X, y, idx, mtry, min_leaf, max_depth,
            features[k], thresholds[k], lefts[k], rights[k], values[k],
        )
        node_counts[k] = n_nodes
        for i in range(n):
            inbag[i] = False
        for i in range(n):
            inbag[idx[i]] = True
        for i in range(n):
            if not inbag[i]:
                oob_sum[i] += _tree_predict_row(
                    features[k], thresholds[k], lefts[k], rights[k], values[k], X[i]
                )
                oob_cnt[i] += 1.0
    return features, thresholds, lefts, rights, values, node_counts, oob_sum, oob_cnt


@njit(cache=True)
def forest_predict_matrix(features, thresholds, lefts, rights, values, Xq):
    """Ensemble mean prediction for each row of `Xq`."""
    n_trees = features.shape[0]
    nq = Xq.shape[0]
    out = np.zeros(nq)
    for i in range(nq):
        acc = 0.0
        for k in range(n_trees):
            acc += _tree_predict_row(
                features[k], thresholds[k], lefts[k], rights[k], values[k], Xq[i]
            )
        out[i] = acc / n_trees
    return out
