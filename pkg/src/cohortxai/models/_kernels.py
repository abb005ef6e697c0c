"""Compiled inner loops: tree growing, tree traversal and the SMO solver.

Randomness enters only through pre-drawn uniform buffers so the kernels
stay deterministic and free of global RNG state.
"""
import math

import numpy as np
from numba import njit

_LOG2 = math.log(2.0)


@njit(cache=True)
def _impurity(pos, n, criterion):
    if n <= 0:
        return 0.0
    p = pos / n
    if criterion == 0:
        return 2.0 * p * (1.0 - p)
    h = 0.0
    if p > 0.0:
        h -= p * math.log(p)
    if p < 1.0:
        h -= (1.0 - p) * math.log(1.0 - p)
    return h / _LOG2


@njit(cache=True)
def build_cart(X, y, idx, criterion, random_split, max_depth, min_split, min_leaf, max_features, rand):
    """Grow a classification tree on rows ``idx`` (duplicates allowed)."""
    n = idx.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, np.int64)
    importance = np.zeros(d)
    idx = idx.copy()
    buf = np.empty(n, np.int64)
    vals = np.empty(n)
    feats = np.arange(d)
    R = rand.shape[0]
    rpos = 0

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 1
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        m = end - start
        pos = 0.0
        for i in range(start, end):
            pos += y[idx[i]]
        value[node] = pos / m
        count[node] = m
        imp = _impurity(pos, m, criterion)
        if depth >= max_depth or m < min_split or m < 2 * min_leaf or imp <= 1e-15:
            continue

        for k in range(max_features):
            j = k + int(rand[rpos % R] * (d - k))
            rpos += 1
            if j >= d:
                j = d - 1
            tmp = feats[k]
            feats[k] = feats[j]
            feats[j] = tmp
        cand = np.sort(feats[:max_features])

        best_score = np.inf
        best_f = -1
        best_t = 0.0
        best_pl = 0.0
        best_nl = 0
        for f in cand:
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            if random_split:
                lo = vals[0]
                hi = vals[0]
                for i in range(1, m):
                    if vals[i] < lo:
                        lo = vals[i]
                    if vals[i] > hi:
                        hi = vals[i]
                u = rand[rpos % R]
                rpos += 1
                if hi <= lo:
                    continue
                t = lo + u * (hi - lo)
                if t >= hi:
                    t = lo
                nl = 0
                pl = 0.0
                for i in range(m):
                    if vals[i] <= t:
                        nl += 1
                        pl += y[idx[start + i]]
                if nl < min_leaf or m - nl < min_leaf:
                    continue
                score = nl * _impurity(pl, nl, criterion) + (m - nl) * _impurity(pos - pl, m - nl, criterion)
                if score < best_score:
                    best_score = score
                    best_f = f
                    best_t = t
                    best_pl = pl
                    best_nl = nl
            else:
                order = np.argsort(vals[:m])
                pl = 0.0
                for i in range(m - 1):
                    pl += y[idx[start + order[i]]]
                    v = vals[order[i]]
                    vn = vals[order[i + 1]]
                    if vn <= v:
                        continue
                    nl = i + 1
                    if nl < min_leaf or m - nl < min_leaf:
                        continue
                    score = nl * _impurity(pl, nl, criterion) + (m - nl) * _impurity(pos - pl, m - nl, criterion)
                    if score < best_score:
                        best_score = score
                        best_f = f
                        t = 0.5 * (v + vn)
                        if t >= vn:
                            t = v
                        best_t = t
                        best_pl = pl
                        best_nl = nl
        if best_f < 0:
            continue

        lo_i = start
        hi_i = 0
        for i in range(start, end):
            r = idx[i]
            if X[r, best_f] <= best_t:
                idx[lo_i] = r
                lo_i += 1
            else:
                buf[hi_i] = r
                hi_i += 1
        for i in range(hi_i):
            idx[lo_i + i] = buf[i]
        mid = start + best_nl

        feature[node] = best_f
        threshold[node] = best_t
        nr = m - best_nl
        importance[best_f] += (
            m * imp
            - best_nl * _impurity(best_pl, best_nl, criterion)
            - nr * _impurity(pos - best_pl, nr, criterion)
        )
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1
        n_nodes += 2

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        count[:n_nodes].copy(),
        importance,
    )


@njit(cache=True)
def build_boost_tree(X, g, h, rows, cols, max_depth, min_child_weight, gamma, lam):
    """Exact greedy second-order regression tree on ``rows`` x ``cols``.

    Leaves hold the Newton weight ``-G / (H + lam)``; a split is kept only
    when its gain exceeds ``gamma``.
    """
    n = rows.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    cover = np.zeros(cap)
    gain_imp = np.zeros(d)
    idx = rows.copy()
    buf = np.empty(n, np.int64)
    vals = np.empty(n)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 1
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        m = end - start
        G = 0.0
        H = 0.0
        for i in range(start, end):
            G += g[idx[i]]
            H += h[idx[i]]
        value[node] = -G / (H + lam)
        cover[node] = H
        if depth >= max_depth or m < 2:
            continue
        parent = G * G / (H + lam)
        best_gain = 0.0
        best_f = -1
        best_t = 0.0
        best_nl = 0
        for f in cols:
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:m])
            GL = 0.0
            HL = 0.0
            for i in range(m - 1):
                r = idx[start + order[i]]
                GL += g[r]
                HL += h[r]
                v = vals[order[i]]
                vn = vals[order[i + 1]]
                if vn <= v:
                    continue
                HR = H - HL
                if HL < min_child_weight or HR < min_child_weight:
                    continue
                GR = G - GL
                gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent)
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    t = 0.5 * (v + vn)
                    if t >= vn:
                        t = v
                    best_t = t
                    best_nl = i + 1
        if best_f < 0 or best_gain <= gamma or best_gain <= 1e-12:
            continue
        lo_i = start
        hi_i = 0
        for i in range(start, end):
            r = idx[i]
            if X[r, best_f] <= best_t:
                idx[lo_i] = r
                lo_i += 1
            else:
                buf[hi_i] = r
                hi_i += 1
        for i in range(hi_i):
            idx[lo_i + i] = buf[i]
        mid = start + best_nl
        feature[node] = best_f
        threshold[node] = best_t
        gain_imp[best_f] += best_gain
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1
        n_nodes += 2

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        cover[:n_nodes].copy(),
        gain_imp,
    )


@njit(cache=True)
def predict_packed(feature, threshold, left, right, value, roots, X):
    """Sum of leaf values over all trees whose root offsets are ``roots``."""
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for r in roots:
            node = r
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            s += value[node]
        out[i] = s
    return out


@njit(cache=True)
def smo_solve(Q, y, C, tol, max_iter):
    """Dual soft-margin SVM by SMO with maximal-violating-pair selection.

    ``Q[i, j] = y_i y_j K(x_i, x_j)``. Returns ``alpha``, the dual gradient,
    the final violation gap ``m - M`` and the iteration count.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    gap = np.inf
    while it < max_iter:
        i = -1
        j = -1
        m_up = -np.inf
        M_low = np.inf
        for t in range(n):
            v = -y[t] * G[t]
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                if v > m_up:
                    m_up = v
                    i = t
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                if v < M_low:
                    M_low = v
                    j = t
        gap = m_up - M_low
        if i < 0 or j < 0 or gap < tol:
            break
        it += 1
        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = 1e-12
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = 1e-12
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            G[t] += Q[i, t] * dai + Q[j, t] * daj
    return alpha, G, gap, it
