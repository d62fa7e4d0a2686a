"""Weighted empirical quantiles."""

from __future__ import annotations

import numpy as np


def weighted_quantile(values, probs, weights=None) -> np.ndarray:
    """Inverse of the weighted empirical CDF (smallest v with F(v) >= p).

    Zero-weight points are ignored. Returns an array shaped like ``probs``.
    """
    v = np.asarray(values, dtype=float).ravel()
    p = np.asarray(probs, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != v.shape:
            raise ValueError("values and weights differ in length")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
    keep = w > 0
    v, w = v[keep], w[keep]
    if v.size == 0:
        raise ValueError("no positively weighted value")
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    cdf = np.cumsum(w)
    total = cdf[-1]
    # small slack so that p * total landing exactly on a jump picks that jump
    idx = np.searchsorted(cdf, p * total * (1 - 1e-12), side="left")
    return v[np.clip(idx, 0, v.size - 1)]
