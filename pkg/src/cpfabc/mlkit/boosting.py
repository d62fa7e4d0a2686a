"""Gradient boosting of shallow trees with L2, L1 and pinball losses."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ..errors import TrainingError
from .quantiles import weighted_quantile
from .trees import _apply_many, build_tree, presort


@dataclass(frozen=True)
class Loss:
    kind: str  # "l2", "l1" or "pinball"
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind not in ("l2", "l1", "pinball"):
            raise ValueError(f"unknown loss {self.kind!r}")
        if self.kind == "pinball" and not 0 < self.alpha < 1:
            raise ValueError("pinball level must lie in (0, 1)")

    @classmethod
    def parse(cls, spec) -> "Loss":
        """Accepts a Loss, ``"l1"``, ``"l2"``, ``"pinball:0.9"`` or ``("pinball", 0.9)``."""
        if isinstance(spec, Loss):
            return spec
        if isinstance(spec, tuple):
            return cls(spec[0].lower(), float(spec[1]))
        s = str(spec).lower()
        if s.startswith("pinball"):
            _, _, a = s.partition(":")
            return cls("pinball", float(a or 0.5))
        return cls(s)

    def value(self, y, f, w) -> float:
        r = y - f
        if self.kind == "l2":
            v = r * r
        elif self.kind == "l1":
            v = np.abs(r)
        else:
            v = np.where(r >= 0, self.alpha * r, (self.alpha - 1) * r)
        return float(np.sum(w * v) / np.sum(w))

    def negative_gradient(self, y, f) -> np.ndarray:
        if self.kind == "l2":
            return y - f
        below = (y < f).astype(float)
        if self.kind == "l1":
            return 1.0 - 2.0 * below
        return self.alpha - below

    def location(self, r, w) -> float:
        """Constant minimising the weighted loss of residuals ``r``."""
        if self.kind == "l2":
            return float(np.sum(w * r) / np.sum(w))
        level = 0.5 if self.kind == "l1" else self.alpha
        return float(weighted_quantile(r, level, w))


@dataclass(frozen=True, eq=False)
class BoostedModel:
    base: float
    loss: Loss
    learning_rate: float
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf updates before shrinkage
    offsets: np.ndarray
    train_loss: np.ndarray  # after each stage

    @property
    def n_stages(self) -> int:
        return self.offsets.size - 1

    def predict(self, X, stages: int | None = None) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        k = self.n_stages if stages is None else int(stages)
        leaves = _apply_many(self.feature, self.threshold, self.left, self.right,
                             self.offsets[: k + 1], X)
        return self.base + self.learning_rate * self.value[leaves].sum(axis=0)


def gbm_fit(X, y, loss="l2", w=None, stages: int = 500, depth: int = 3,
            learning_rate: float = 0.05, min_leaf: int = 10, subsample: float = 1.0,
            seed=0) -> BoostedModel:
    """Boosted depth-limited trees.

    Each stage fits a tree to the negative gradient of ``loss`` at the
    current scores, then replaces every leaf value by the loss-minimising
    constant of the residuals in that leaf (mean, median or alpha-quantile).
    """
    loss = Loss.parse(loss)
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if y.size != n:
        raise ValueError("X and y differ in length")
    if stages < 1:
        raise ValueError("stages must be >= 1")
    if not 0 < learning_rate <= 1:
        raise ValueError("learning rate must lie in (0, 1]")
    if not 0 < subsample <= 1:
        raise ValueError("subsample must lie in (0, 1]")
    w = np.ones(n) if w is None else np.asarray(w, dtype=float).ravel()
    if w.shape != (n,) or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be non-negative with a positive sum")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise TrainingError("non-finite training data")

    pos = w > 0
    presorted = presort(X)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & ((1 << 63) - 1)))
    base = loss.location(y[pos], w[pos])
    f = np.full(n, base)
    trees = []
    losses = np.empty(stages)
    n_sub = max(1, int(round(subsample * pos.sum())))
    pos_idx = np.flatnonzero(pos)
    for t in range(stages):
        if subsample < 1:
            cnt = np.zeros(n, dtype=np.int64)
            cnt[rng.choice(pos_idx, size=n_sub, replace=False)] = 1
        else:
            cnt = pos.astype(np.int64)
        g = loss.negative_gradient(y, f)
        sw = w * cnt
        tree, node_of = build_tree(X, presorted, g, sw, cnt, depth, min_leaf, d,
                                   int(rng.integers(0, 2**31 - 1)))
        value = tree.value.copy()
        if loss.kind != "l2":
            r = y - f
            _leaf_locations(value, node_of, r, sw, loss)
        leaf = node_of if np.all(cnt > 0) else tree.apply(X)
        f = f + learning_rate * value[leaf]
        if not np.all(np.isfinite(f)):
            raise TrainingError(f"boosting diverged at stage {t}")
        losses[t] = loss.value(y[pos], f[pos], w[pos])
        trees.append((tree, value))

    sizes = np.array([tr.n_nodes for tr, _ in trees], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    return BoostedModel(
        base, loss, float(learning_rate),
        np.concatenate([tr.feature for tr, _ in trees]),
        np.concatenate([tr.threshold for tr, _ in trees]),
        np.concatenate([tr.left for tr, _ in trees]),
        np.concatenate([tr.right for tr, _ in trees]),
        np.concatenate([v for _, v in trees]),
        offsets, losses)


def _leaf_locations(value, node_of, r, sw, loss: Loss) -> None:
    level = 0.5 if loss.kind == "l1" else loss.alpha
    _leaf_quantiles(value, node_of, r, sw, level)


@nb.njit(cache=True)
def _leaf_quantiles(value, node_of, r, sw, level):
    """Weighted ``level``-quantile of ``r`` within each leaf (inverse CDF)."""
    n = r.size
    idx = np.argsort(node_of, kind="mergesort")
    t = 0
    while t < n:
        nd = node_of[idx[t]]
        u = t
        while u < n and node_of[idx[u]] == nd:
            u += 1
        if nd >= 0:
            seg = idx[t:u]
            rr = r[seg]
            ww = sw[seg]
            o = np.argsort(rr, kind="mergesort")
            total = 0.0
            for k in range(o.size):
                total += ww[o[k]]
            if total > 0:
                target = level * total * (1 - 1e-12)
                acc = 0.0
                pick = rr[o[o.size - 1]]
                for k in range(o.size):
                    w = ww[o[k]]
                    if w <= 0:
                        continue
                    acc += w
                    if acc >= target:
                        pick = rr[o[k]]
                        break
                value[nd] = pick
        t = u


def gbm_predict(model: BoostedModel, x0) -> np.ndarray:
    return model.predict(x0)
