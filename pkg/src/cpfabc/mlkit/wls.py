"""Weighted least squares with a minimum-norm fallback."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class WlsFit:
    coef: np.ndarray  # intercept first
    residuals: np.ndarray  # y - fitted, unweighted
    rank: int

    @property
    def intercept(self) -> float:
        return float(self.coef[0])

    @property
    def full_rank(self) -> bool:
        return self.rank == self.coef.size

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.coef[0] + X @ self.coef[1:]


def wls_fit(X, y, w=None) -> WlsFit:
    """Minimise sum_m w_m (y_m - b0 - x_m . b)^2.

    Rows with zero weight do not enter the fit. Rank-deficient problems get
    the minimum-norm solution from an SVD-based least-squares solve.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError("X and y differ in length")
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float).ravel()
    if w.shape != y.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite, non-negative and match y")
    pos = w > 0
    if not np.any(pos):
        raise ValueError("all weights are zero")
    A = np.column_stack([np.ones(int(pos.sum())), X[pos]])
    sw = np.sqrt(w[pos])
    coef, _, rank, _ = np.linalg.lstsq(A * sw[:, None], y[pos] * sw, rcond=None)
    resid = y - (coef[0] + X @ coef[1:])
    return WlsFit(coef, resid, int(rank))
