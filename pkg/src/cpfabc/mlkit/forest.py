"""Regression forests with out-of-bag and quantile prediction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .quantiles import weighted_quantile
from .trees import _apply_many, build_tree, presort


@dataclass(frozen=True, eq=False)
class Forest:
    """Trees packed back to back at ``offsets``; child ids are tree-local
    while leaf ids returned by :meth:`leaves` are global.

    ``train_leaf[t, i]`` is the leaf reached by training row ``i`` in tree
    ``t`` (in-bag or not) and ``inbag[t, i]`` its bootstrap multiplicity.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray
    train_leaf: np.ndarray
    inbag: np.ndarray
    y: np.ndarray
    w: np.ndarray  # weights of training rows in quantile prediction
    mtry: int
    min_leaf: int

    @property
    def n_trees(self) -> int:
        return self.offsets.size - 1

    def leaves(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        return _apply_many(self.feature, self.threshold, self.left, self.right, self.offsets, X)

    def predict(self, X) -> np.ndarray:
        """Mean over trees of the in-bag leaf means."""
        return self.value[self.leaves(X)].mean(axis=0)

    def oob_predict(self) -> np.ndarray:
        """Out-of-bag prediction for each training row; rows that are in
        every bootstrap sample fall back to the full-forest prediction."""
        vals = self.value[self.train_leaf]
        oob = self.inbag == 0
        n_oob = oob.sum(axis=0)
        out = np.where(oob, vals, 0.0).sum(axis=0)
        full = vals.mean(axis=0)
        return np.where(n_oob > 0, out / np.maximum(n_oob, 1), full)

    def quantile_weights(self, x0) -> np.ndarray:
        """Weights over training rows for each query, shape ``(q, n)``.

        A row in the query's leaf of tree ``t`` gets ``w_i / W_leaf`` from that
        tree; the result is averaged over trees and sums to 1.
        """
        q_leaf = self.leaves(x0)
        wnode = _node_weight(self.train_leaf, self.w, self.value.size)
        return _qrf_weights(self.train_leaf, self.w, wnode, q_leaf)

    def quantiles(self, x0, probs=(0.025, 0.5, 0.975)) -> np.ndarray:
        """Weighted empirical quantiles of ``y``, shape ``(q, len(probs))``."""
        wts = self.quantile_weights(x0)
        return np.array([weighted_quantile(self.y, probs, wq) for wq in wts])


@nb.njit(cache=True)
def _node_weight(train_leaf, w, n_nodes):
    out = np.zeros(n_nodes)
    T, n = train_leaf.shape
    for t in range(T):
        for i in range(n):
            out[train_leaf[t, i]] += w[i]
    return out


@nb.njit(cache=True)
def _qrf_weights(train_leaf, w, wnode, q_leaf):
    T, n = train_leaf.shape
    nq = q_leaf.shape[1]
    out = np.zeros((nq, n))
    for q in range(nq):
        used = 0
        for t in range(T):
            leaf = q_leaf[t, q]
            tot = wnode[leaf]
            if tot <= 0:
                continue
            used += 1
            for i in range(n):
                if train_leaf[t, i] == leaf:
                    out[q, i] += w[i] / tot
        if used > 0:
            for i in range(n):
                out[q, i] /= used
    return out


def forest_fit(X, y, w=None, n_trees: int = 500, mtry: int | None = None,
               min_leaf: int = 5, seed=0, bootstrap: bool = True,
               max_depth: int = -1) -> Forest:
    """Random forest of variance-reduction trees.

    Each tree sees a bootstrap sample of size n drawn with probabilities
    proportional to ``w`` (uniform when ``w`` is None) and draws ``mtry``
    candidate features per node (default ceil(D/3)). With
    ``bootstrap=False`` every tree uses all rows once, weighted by ``w``.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if y.size != n:
        raise ValueError("X and y differ in length")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    mtry = max(1, math.ceil(d / 3)) if mtry is None else int(mtry)
    if not 1 <= mtry <= d:
        raise ValueError("mtry must lie in 1..D")
    if w is None:
        w = np.ones(n)
    w = np.asarray(w, dtype=float).ravel()
    if w.shape != (n,) or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be non-negative with a positive sum")
    p = w / w.sum()
    presorted = presort(X)
    streams = np.random.SeedSequence(_entropy(seed)).spawn(n_trees)
    trees, inbag = [], np.zeros((n_trees, n), dtype=np.int64)
    for t, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        if bootstrap:
            cnt = rng.multinomial(n, p).astype(np.int64)
            sw = cnt.astype(float)
        else:
            cnt = (w > 0).astype(np.int64)
            sw = w.copy()
        tree_seed = int(rng.integers(0, 2**31 - 1))
        tree, _ = build_tree(X, presorted, y, sw, cnt, max_depth, min_leaf, mtry, tree_seed)
        trees.append(tree)
        inbag[t] = cnt
    sizes = np.array([tr.n_nodes for tr in trees], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    feature = np.concatenate([tr.feature for tr in trees])
    threshold = np.concatenate([tr.threshold for tr in trees])
    left = np.concatenate([tr.left for tr in trees])
    right = np.concatenate([tr.right for tr in trees])
    value = np.concatenate([tr.value for tr in trees])
    train_leaf = _apply_many(feature, threshold, left, right, offsets, X)
    return Forest(feature, threshold, left, right, value, offsets, train_leaf,
                  inbag, y, w, mtry, min_leaf)


def _entropy(seed) -> int:
    return int(seed) & ((1 << 63) - 1)
