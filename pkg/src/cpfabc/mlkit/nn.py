"""Single-hidden-layer logistic network trained on a weighted, penalised
squared error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from ..errors import TrainingError


@dataclass(frozen=True, eq=False)
class NeuralFit:
    W1: np.ndarray  # (D, H)
    b1: np.ndarray
    w2: np.ndarray  # (H,)
    b2: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    loss: float  # final penalised objective on the standardised scale

    @property
    def hidden(self) -> int:
        return self.w2.size

    def predict(self, X) -> np.ndarray:
        Z = (np.atleast_2d(np.asarray(X, dtype=float)) - self.x_mean) / self.x_scale
        h = special.expit(Z @ self.W1 + self.b1)
        return self.y_mean + self.y_scale * (h @ self.w2 + self.b2)


def _unpack(theta, d, h):
    W1 = theta[: d * h].reshape(d, h)
    b1 = theta[d * h: d * h + h]
    w2 = theta[d * h + h: d * h + 2 * h]
    return W1, b1, w2, theta[-1]


def objective(theta, Z, t, wn, d, h, weight_decay):
    """Weighted mean squared error plus ``weight_decay * ||theta||^2`` and
    its gradient. ``wn`` are weights normalised to sum to 1."""
    W1, b1, w2, b2 = _unpack(theta, d, h)
    H = special.expit(Z @ W1 + b1)
    r = H @ w2 + b2 - t
    loss = float(np.dot(wn, r * r) + weight_decay * np.dot(theta, theta))
    g_out = 2.0 * wn * r
    g_hid = np.outer(g_out, w2) * H * (1.0 - H)
    grad = np.concatenate([
        (Z.T @ g_hid).ravel(), g_hid.sum(axis=0), H.T @ g_out, [g_out.sum()],
    ]) + 2.0 * weight_decay * theta
    return loss, grad


def _wstats(v, wn):
    m = wn @ v
    s = np.sqrt(wn @ (v - m) ** 2)
    return m, np.where(s > 0, s, 1.0)


def nn_fit(X, y, w=None, hidden: int = 8, weight_decay: float = 1e-3,
           max_iter: int = 500, seed=0, optimizer: str = "lbfgs",
           step: float = 0.1, tol: float = 1e-10) -> NeuralFit:
    """Fit the network on standardised inputs and target.

    ``optimizer="lbfgs"`` uses scipy's L-BFGS-B with the analytic gradient;
    ``"gd"`` runs ``max_iter`` full-batch gradient steps of size ``step``.
    Raises :class:`TrainingError` when the objective becomes non-finite.
    """
    if hidden < 1:
        raise ValueError("hidden size must be >= 1")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if y.size != n:
        raise ValueError("X and y differ in length")
    w = np.ones(n) if w is None else np.asarray(w, dtype=float).ravel()
    if np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be non-negative with a positive sum")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise TrainingError("non-finite training data")
    keep = w > 0
    X, y, w = X[keep], y[keep], w[keep]
    wn = w / w.sum()
    xm, xs = _wstats(X, wn)
    ym, ys = _wstats(y, wn)
    Z = (X - xm) / xs
    t = (y - ym) / ys

    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & ((1 << 63) - 1)))
    theta = np.concatenate([
        rng.normal(0.0, 1.0 / np.sqrt(d), d * hidden), np.zeros(hidden),
        rng.normal(0.0, 1.0 / np.sqrt(hidden), hidden), [0.0],
    ])
    args = (Z, t, wn, d, hidden, weight_decay)
    with np.errstate(over="ignore", invalid="ignore"):
        if optimizer == "lbfgs":
            res = optimize.minimize(objective, theta, args=args, jac=True, method="L-BFGS-B",
                                    options={"maxiter": int(max_iter), "ftol": tol, "gtol": tol * 1e-2})
            theta, loss = res.x, float(res.fun)
        elif optimizer == "gd":
            loss = np.inf
            for _ in range(int(max_iter)):
                loss, grad = objective(theta, *args)
                if not np.isfinite(loss):
                    break
                theta = theta - step * grad
            loss = objective(theta, *args)[0]
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
    if not (np.isfinite(loss) and np.all(np.isfinite(theta))):
        raise TrainingError("network training diverged")
    W1, b1, w2, b2 = _unpack(theta, d, hidden)
    return NeuralFit(W1.copy(), b1.copy(), w2.copy(), float(b2), xm, xs, float(ym), float(ys), loss)
