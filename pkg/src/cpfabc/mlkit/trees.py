"""Regression-tree builder on presorted features.

Each node owns a contiguous segment of every feature's sorted row list, so
split search is a sequential scan and a split is a stable partition of the
segments. Splits maximise ``S_L^2 / W_L + S_R^2 / W_R`` (weighted sums of
the target and of the weights); candidates are visited by ascending feature
and ascending threshold and only a strictly better score replaces the
incumbent, which breaks ties toward the lowest feature index and then the
lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray  # -1 for leaves
    threshold: np.ndarray  # go left when x <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # weighted mean of the target in the node

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        return _apply(self.feature, self.threshold, self.left, self.right, X)

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]


def presort(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stable per-column argsort and dense ranks, both ``(D, n)`` int32.

    ``rank[f, t]`` is the dense rank of the ``t``-th smallest value of
    column ``f``, so equal values share a rank.
    """
    X = np.asarray(X, dtype=np.float64)
    order = np.argsort(X, axis=0, kind="stable").T
    xs = np.take_along_axis(X.T, order, axis=1)
    rank = np.zeros(order.shape, dtype=np.int32)
    if xs.shape[1] > 1:
        rank[:, 1:] = np.cumsum(xs[:, 1:] != xs[:, :-1], axis=1)
    return np.ascontiguousarray(order, dtype=np.int32), rank


def build_tree(X, presorted, y, sw, cnt, max_depth=-1, min_leaf=1, mtry=None, seed=0) -> tuple[Tree, np.ndarray]:
    """Grow one tree on ``presorted = presort(X)``.

    Returns the tree and the leaf id of every row (``-1`` for rows with
    ``cnt == 0``).

    ``sw`` are sample weights used in the split score and node values;
    ``cnt`` are multiplicities used for ``min_leaf`` (bootstrap counts, or 1).
    ``max_depth < 0`` grows until leaves are pure or too small.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    mtry = d if mtry is None else int(mtry)
    if not 1 <= mtry <= d:
        raise ValueError("mtry must lie in 1..D")
    feat, thr, left, right, val, node_of = _build(
        X, presorted[0], presorted[1], np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(sw, dtype=np.float64), np.ascontiguousarray(cnt, dtype=np.int64),
        int(max_depth), int(min_leaf), mtry, int(seed))
    return Tree(feat, thr, left, right, val), node_of


@nb.njit(cache=True)
def _build(X, order, rank, y, sw, cnt, max_depth, min_leaf, mtry, seed):
    np.random.seed(seed)
    n, d = X.shape
    n_act = 0
    for i in range(n):
        if cnt[i] > 0:
            n_act += 1
    cap = 2 * max(n_act, 1) + 1
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    val = np.zeros(cap)
    node_of = np.full(n, -1, dtype=np.int64)
    # rows[f, s:e] are the rows of the node owning [s, e), sorted by feature f
    rows = np.empty((d, n_act), dtype=np.int32)
    xs = np.empty((d, n_act), dtype=np.int32)  # dense ranks
    if n_act == n:
        rows[:, :] = order
        xs[:, :] = rank
    else:
        for f in range(d):
            t2 = 0
            for t in range(n):
                i = order[f, t]
                if cnt[i] > 0:
                    rows[f, t2] = i
                    xs[f, t2] = rank[f, t]
                    t2 += 1
    goes_left = np.zeros(n, dtype=np.int32)
    tmp_r = np.empty(n_act, dtype=np.int32)
    tmp_x = np.empty(n_act, dtype=np.int32)
    st_node = np.empty(cap, dtype=np.int64)
    st_s = np.empty(cap, dtype=np.int64)
    st_e = np.empty(cap, dtype=np.int64)
    st_d = np.empty(cap, dtype=np.int64)
    sp = 0
    st_node[0], st_s[0], st_e[0], st_d[0] = 0, 0, n_act, 0
    sp = 1
    n_nodes = 1
    feats = np.arange(d)
    while sp > 0:
        sp -= 1
        node, s, e, depth = st_node[sp], st_s[sp], st_e[sp], st_d[sp]
        W = 0.0
        S = 0.0
        C = 0
        ymin = np.inf
        ymax = -np.inf
        for t in range(s, e):
            i = rows[0, t]
            W += sw[i]
            S += sw[i] * y[i]
            C += cnt[i]
            ymin = min(ymin, y[i])
            ymax = max(ymax, y[i])
        val[node] = S / W if W > 0 else 0.0
        split = (max_depth < 0 or depth < max_depth) and C >= 2 * min_leaf and ymin < ymax
        best = -np.inf
        bf = -1
        bt = -1
        if split:
            if mtry < d:
                feats = np.sort(np.random.permutation(d)[:mtry])
            for f in feats:
                WL = 0.0
                SL = 0.0
                CL = 0
                for t in range(s, e - 1):
                    i = rows[f, t]
                    WL += sw[i]
                    SL += sw[i] * y[i]
                    CL += cnt[i]
                    if xs[f, t] == xs[f, t + 1]:
                        continue
                    if CL < min_leaf or C - CL < min_leaf:
                        continue
                    wr = W - WL
                    if WL > 0 and wr > 0:
                        sr = S - SL
                        score = SL * SL / WL + sr * sr / wr
                        if score > best:
                            best = score
                            bf = f
                            bt = t
        if bf < 0:
            for t in range(s, e):
                node_of[rows[0, t]] = node
            continue
        lo = X[rows[bf, bt], bf]
        hi = X[rows[bf, bt + 1], bf]
        mid = lo + (hi - lo) * 0.5
        if not (mid >= lo and mid < hi):
            mid = lo
        feat[node] = bf
        thr[node] = mid
        for t in range(s, e):
            goes_left[rows[bf, t]] = 1 if t <= bt else 0
        n_left = bt + 1 - s
        # children at the depth limit are leaves: only the row list used
        # for leaf assignment needs partitioning
        last_level = max_depth >= 0 and depth + 1 >= max_depth
        for f in range(d):
            if last_level and f != 0:
                continue
            a = s
            b = 0
            # branchless stable partition; a <= t so writes never pass reads
            for t in range(s, e):
                i = rows[f, t]
                x = xs[f, t]
                g = goes_left[i]
                rows[f, a] = i
                xs[f, a] = x
                tmp_r[b] = i
                tmp_x[b] = x
                a += g
                b += 1 - g
            for u in range(b):
                rows[f, a + u] = tmp_r[u]
                xs[f, a + u] = tmp_x[u]
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp], st_s[sp], st_e[sp], st_d[sp] = n_nodes + 1, s + n_left, e, depth + 1
        sp += 1
        st_node[sp], st_s[sp], st_e[sp], st_d[sp] = n_nodes, s, s + n_left, depth + 1
        sp += 1
        n_nodes += 2
    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), val[:n_nodes].copy(), node_of)


@nb.njit(cache=True)
def _apply(feat, thr, left, right, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        nd = 0
        while feat[nd] >= 0:
            if X[i, feat[nd]] <= thr[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = nd
    return out


@nb.njit(cache=True)
def _apply_many(feat, thr, left, right, offsets, X):
    """Global leaf ids for every (tree, row); trees packed back to back."""
    T = offsets.size - 1
    n = X.shape[0]
    out = np.empty((T, n), dtype=np.int64)
    for t in range(T):
        base = offsets[t]
        for i in range(n):
            nd = 0
            while feat[base + nd] >= 0:
                if X[i, feat[base + nd]] <= thr[base + nd]:
                    nd = left[base + nd]
                else:
                    nd = right[base + nd]
            out[t, i] = base + nd
    return out
