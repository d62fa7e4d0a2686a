"""ABC calibration over a reference table.

All methods share one entry point, :func:`run_method`, and return a
:class:`PosteriorResult`. Sample-based methods (rejection and the
regression adjustments) keep weighted samples; quantile methods (random
forests and boosting) return only the 2.5/50/97.5% triplet. Numerical
trouble in a parameter sets that parameter's failure flag instead of
raising.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError, TrainingError
from .mlkit import forest_fit, gbm_fit, nn_fit, weighted_quantile, wls_fit
from .sumstats import Scaler, SummaryVector, kernel_weights, scale_statistics

__all__ = [
    "ReferenceTable",
    "PosteriorResult",
    "MethodConfig",
    "METHODS",
    "PROBS",
    "rejection",
    "adjust_loclh",
    "adjust_locnlh",
    "adjust_anlh",
    "adjust_rfa",
    "quantile_rf",
    "quantile_gbm",
    "fit_uwqrf",
    "support_filter",
    "run_method",
]

PROBS = (0.025, 0.5, 0.975)

# tag -> display label
METHODS = {
    "rej": "Rej",
    "loclh": "LocLH",
    "locnlh": "LocNLH",
    "anlh": "ANLH",
    "rfa": "RFA",
    "wqrf": "wqRF",
    "uwqrf": "uwqRF",
    "qgbm_l1": "qGBM L1",
    "qgbm_l2": "qGBM L2",
}


# ---------------------------------------------------------------------------
# containers


@dataclass(frozen=True, eq=False)
class ReferenceTable:
    params: np.ndarray  # (M, p)
    stats: np.ndarray  # (M, D)
    names: tuple
    seeds: np.ndarray = None  # per-row simulation seeds
    spec_hash: str = ""
    stat_names: tuple = ()

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.params, dtype=float))
        S = np.atleast_2d(np.asarray(self.stats, dtype=float))
        if P.shape[0] != S.shape[0] or P.shape[0] < 1:
            raise ValueError("params and stats must be row-aligned and non-empty")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(S))):
            raise ValueError("reference table holds non-finite entries")
        if len(self.names) != P.shape[1]:
            raise ValueError("one name per parameter column expected")
        seeds = np.arange(P.shape[0], dtype=np.int64) if self.seeds is None else np.asarray(self.seeds, dtype=np.int64)
        if seeds.shape != (P.shape[0],):
            raise ValueError("one seed per row expected")
        object.__setattr__(self, "params", P)
        object.__setattr__(self, "stats", S)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "stat_names", tuple(self.stat_names))

    @property
    def M(self) -> int:
        return self.params.shape[0]

    @property
    def p(self) -> int:
        return self.params.shape[1]

    @property
    def D(self) -> int:
        return self.stats.shape[1]

    def rows(self, idx) -> "ReferenceTable":
        idx = np.asarray(idx)
        return replace(self, params=self.params[idx], stats=self.stats[idx], seeds=self.seeds[idx])

    def drop(self, idx) -> "ReferenceTable":
        keep = np.ones(self.M, dtype=bool)
        keep[np.asarray(idx, dtype=np.int64)] = False
        return self.rows(np.flatnonzero(keep))


@dataclass(frozen=True, eq=False)
class PosteriorResult:
    """Per-parameter posterior summary.

    ``quantiles`` is ``(p, 3)`` at :data:`PROBS`; ``point`` is the estimate
    used for relative errors (the posterior median, except for boosting
    where it is the L1/L2 fit). ``samples``/``weights`` are present for
    sample-based methods only.
    """

    method: str
    epsilon: float | None
    names: tuple
    quantiles: np.ndarray
    mean: np.ndarray
    point: np.ndarray
    failed: np.ndarray
    samples: np.ndarray | None = None
    weights: np.ndarray | None = None
    warnings: tuple = ()

    def __post_init__(self):
        q = np.asarray(self.quantiles, dtype=float)
        object.__setattr__(self, "quantiles", q)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "failed", np.asarray(self.failed, dtype=bool))
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        ok = ~self.failed
        if np.any(np.diff(q[ok], axis=1) < 0):
            raise ValueError("quantiles must be non-decreasing")
        if self.weights is not None and not math.isclose(float(np.sum(self.weights)), 1.0, rel_tol=1e-9):
            raise ValueError("sample weights must sum to 1")

    @property
    def label(self) -> str:
        return METHODS.get(self.method, self.method)

    @property
    def any_failed(self) -> bool:
        return bool(np.any(self.failed))

    def interval(self, i: int) -> tuple[float, float]:
        return float(self.quantiles[i, 0]), float(self.quantiles[i, 2])

    @classmethod
    def from_samples(cls, method, epsilon, names, samples, weights, warnings=(), failed=None):
        samples = np.asarray(samples, dtype=float)
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        p = samples.shape[1]
        failed = np.zeros(p, dtype=bool) if failed is None else np.asarray(failed, dtype=bool).copy()
        q = np.full((p, 3), np.nan)
        mean = np.full(p, np.nan)
        for i in range(p):
            col = samples[:, i]
            if failed[i] or not np.all(np.isfinite(col)):
                failed[i] = True
                continue
            q[i] = weighted_quantile(col, PROBS, w)
            mean[i] = float(np.dot(w, col))
        return cls(method, epsilon, names, q, mean, q[:, 1].copy(), failed, samples, w, warnings)

    def to_rows(self) -> list[dict]:
        out = []
        for i, name in enumerate(self.names):
            out.append({
                "parameter": name,
                "method": self.label,
                "q2.5": self.quantiles[i, 0],
                "q50": self.quantiles[i, 1],
                "q97.5": self.quantiles[i, 2],
                "mean": self.mean[i],
                "point": self.point[i],
                "failure": int(self.failed[i]),
            })
        return out

    def to_csv(self, path) -> None:
        cols = ["parameter", "method", "q2.5", "q50", "q97.5", "mean", "point", "failure"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.to_rows():
                w.writerow([_fmt(row[c]) for c in cols])

    @classmethod
    def from_csv(cls, path) -> "PosteriorResult":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise FormatError(f"{path}: empty posterior file")
        try:
            label = rows[0]["method"]
            tag = next((k for k, v in METHODS.items() if v == label), label)
            q = np.array([[float(r["q2.5"]), float(r["q50"]), float(r["q97.5"])] for r in rows])
            mean = np.array([float(r["mean"]) for r in rows])
            point = np.array([float(r["point"]) for r in rows])
            failed = np.array([int(r["failure"]) for r in rows], dtype=bool)
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path}: malformed posterior row") from exc
        return cls(tag, None, [r["parameter"] for r in rows], q, mean, point, failed)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


@dataclass(frozen=True)
class MethodConfig:
    epsilon: float = 0.05
    seed: int = 0
    # forests
    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 5
    wqrf_mode: str = "bootstrap"  # or "subset"
    # boosting
    gbm_stages: int = 500
    gbm_depth: int = 3
    gbm_learning_rate: float = 0.05
    gbm_min_leaf: int = 10
    gbm_subsample: float = 1.0
    # networks
    nn_hidden: int = 8
    nn_weight_decay: float = 1e-3
    nn_max_iter: int = 500
    nn_optimizer: str = "lbfgs"
    nn_step: float = 0.1
    # two-stage support filter
    anlh_k: int = 10
    anlh_rho: float = 0.95
    anlh_min_retained: int = 50
    # parameter transform before adjustment: "none" or "support"
    transform: str = "none"
    bounds: tuple = ()  # per-parameter (low, high) for the support transform

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if self.wqrf_mode not in ("bootstrap", "subset"):
            raise ValueError("wqrf_mode must be 'bootstrap' or 'subset'")
        if self.transform not in ("none", "support"):
            raise ValueError("transform must be 'none' or 'support'")
        if not 0 < self.anlh_rho <= 1:
            raise ValueError("anlh_rho must lie in (0, 1]")


def _sub_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *key]).generate_state(1)[0] & 0x7FFFFFFF)


def _observed(observed) -> np.ndarray:
    return observed.values if isinstance(observed, SummaryVector) else np.asarray(observed, dtype=float).ravel()


# ---------------------------------------------------------------------------
# parameter transforms


class _Transform:
    """Optional log/logit reparametrisation by parameter support."""

    def __init__(self, bounds: Sequence, p: int, enabled: bool):
        self.kinds = []
        for i in range(p):
            lo, hi = bounds[i] if enabled and i < len(bounds) else (-np.inf, np.inf)
            if not enabled or (lo == -np.inf and hi == np.inf):
                self.kinds.append(("id", 0.0, 0.0))
            elif hi == np.inf:
                self.kinds.append(("log", lo, 0.0))
            else:
                self.kinds.append(("logit", lo, hi))

    def forward(self, P):
        out = np.array(P, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, (k, lo, hi) in enumerate(self.kinds):
                if k == "log":
                    out[:, i] = np.log(P[:, i] - lo)
                elif k == "logit":
                    u = (P[:, i] - lo) / (hi - lo)
                    out[:, i] = np.log(u) - np.log1p(-u)
        return out

    def backward(self, Z):
        out = np.array(Z, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            for i, (k, lo, hi) in enumerate(self.kinds):
                if k == "log":
                    out[:, i] = lo + np.exp(Z[:, i])
                elif k == "logit":
                    out[:, i] = lo + (hi - lo) / (1.0 + np.exp(-Z[:, i]))
        return out


# ---------------------------------------------------------------------------
# methods


def _accept(table: ReferenceTable, obs, epsilon: float, scaler: Scaler | None):
    scaler = scale_statistics(table.stats) if scaler is None else scaler
    kw = kernel_weights(table.stats, obs, epsilon, scaler)
    idx = kw.support
    return kw, idx, scaler


def rejection(table: ReferenceTable, observed, epsilon: float, scaler: Scaler | None = None) -> PosteriorResult:
    """Epanechnikov-weighted accepted draws."""
    kw, idx, _ = _accept(table, _observed(observed), epsilon, scaler)
    return PosteriorResult.from_samples("rej", epsilon, table.names, table.params[idx], kw.weights[idx])


def _design(table, obs, idx, scaler):
    """Scaled statistics of the accepted rows, centred at the observation."""
    return scaler.transform(table.stats[idx]) - scaler.transform(obs)


def adjust_loclh(table: ReferenceTable, observed, epsilon: float, scaler: Scaler | None = None,
                 config: MethodConfig | None = None) -> PosteriorResult:
    """Local linear heteroscedastic adjustment.

    Per parameter, a weighted linear fit gives the conditional mean and a
    second one the log squared residual; accepted draws are moved to the
    observation and their residuals rescaled by the spread ratio. No
    clipping to the parameter support, so pathologies stay visible.
    """
    cfg = config or MethodConfig(epsilon=epsilon)
    obs = _observed(observed)
    kw, idx, scaler = _accept(table, obs, epsilon, scaler)
    X = _design(table, obs, idx, scaler)
    w = kw.weights[idx]
    tf = _Transform(cfg.bounds, table.p, cfg.transform == "support")
    P = tf.forward(table.params[idx])
    out = np.empty_like(P)
    notes = []
    with np.errstate(all="ignore"):
        for i in range(table.p):
            fit = wls_fit(X, P[:, i], w)
            if not fit.full_rank:
                notes.append(f"{table.names[i]}: rank-deficient mean fit, minimum-norm solution used")
            resid = fit.residuals
            fit2 = wls_fit(X, np.log(resid * resid), w) if np.all(np.isfinite(np.log(resid * resid))) else None
            if fit2 is None:
                out[:, i] = np.nan
                continue
            ratio = np.exp(0.5 * (fit2.intercept - fit2.predict(X)))
            out[:, i] = fit.intercept + resid * ratio
    out = tf.backward(out)
    return PosteriorResult.from_samples("loclh", epsilon, table.names, out, w, notes)


def _nn_adjust(X, P, w, names, cfg: MethodConfig, salt: int):
    """Nonlinear heteroscedastic adjustment; returns samples, failure flags and notes."""
    n, p = P.shape
    out = np.empty_like(P)
    failed = np.zeros(p, dtype=bool)
    notes = []
    x0 = np.zeros((1, X.shape[1]))
    for i in range(p):
        try:
            seed = _sub_seed(cfg.seed, salt, i)
            fm = nn_fit(X, P[:, i], w, cfg.nn_hidden, cfg.nn_weight_decay, cfg.nn_max_iter, seed,
                        cfg.nn_optimizer, cfg.nn_step)
            resid = P[:, i] - fm.predict(X)
            r2 = resid * resid
            pos = r2[r2 > 0]
            if pos.size == 0:
                ratio = np.ones(n)
                notes.append(f"{names[i]}: zero residuals, spread ratio set to 1")
            else:
                # floor keeps log finite for exact fits of single rows
                r2 = np.maximum(r2, pos.min() * 1e-6)
                fv = nn_fit(X, np.log(r2), w, cfg.nn_hidden, cfg.nn_weight_decay, cfg.nn_max_iter,
                            seed + 1, cfg.nn_optimizer, cfg.nn_step)
                ratio = np.exp(0.5 * (fv.predict(x0)[0] - fv.predict(X)))
            with np.errstate(all="ignore"):
                out[:, i] = fm.predict(x0)[0] + resid * ratio
        except TrainingError as exc:
            out[:, i] = np.nan
            failed[i] = True
            notes.append(f"{names[i]}: {exc}")
    return out, failed, notes


def adjust_locnlh(table: ReferenceTable, observed, epsilon: float, config: MethodConfig | None = None,
                  scaler: Scaler | None = None) -> PosteriorResult:
    """Heteroscedastic adjustment with single-hidden-layer networks for
    both the conditional mean and the log squared residual."""
    cfg = config or MethodConfig(epsilon=epsilon)
    obs = _observed(observed)
    kw, idx, scaler = _accept(table, obs, epsilon, scaler)
    X = _design(table, obs, idx, scaler)
    w = kw.weights[idx]
    tf = _Transform(cfg.bounds, table.p, cfg.transform == "support")
    out, failed, notes = _nn_adjust(X, tf.forward(table.params[idx]), w, table.names, cfg, 1)
    return PosteriorResult.from_samples("locnlh", epsilon, table.names, tf.backward(out), w, notes, failed)


def support_filter(cloud: np.ndarray, k: int = 10, rho: float = 0.95) -> np.ndarray:
    """Boolean mask of points whose distance to their k-th nearest neighbour
    is at most the rho-quantile of all such distances.

    Columns are centred by the median and scaled by the MAD first.
    """
    Z = np.asarray(cloud, dtype=float)
    n = Z.shape[0]
    if rho >= 1 or n <= k:
        return np.ones(n, dtype=bool)
    sc = scale_statistics(Z)
    Z = sc.transform(Z)
    dist, _ = cKDTree(Z).query(Z, k=k + 1)
    radius = dist[:, -1]
    return radius <= np.quantile(radius, rho)


def adjust_anlh(table: ReferenceTable, observed, epsilon: float, config: MethodConfig | None = None,
                scaler: Scaler | None = None) -> PosteriorResult:
    """Two-stage nonlinear adjustment.

    Stage 1 is :func:`adjust_locnlh`; the adjusted cloud is trimmed to its
    estimated support by a kNN-radius filter, and the networks are refit on
    the retained rows. Falls back to stage 1 (with a warning) when fewer
    than ``anlh_min_retained`` rows survive or stage 1 failed.
    """
    cfg = config or MethodConfig(epsilon=epsilon)
    obs = _observed(observed)
    kw, idx, scaler = _accept(table, obs, epsilon, scaler)
    X = _design(table, obs, idx, scaler)
    w = kw.weights[idx]
    tf = _Transform(cfg.bounds, table.p, cfg.transform == "support")
    P = tf.forward(table.params[idx])
    stage1, failed, notes = _nn_adjust(X, P, w, table.names, cfg, 1)

    def result(samples, weights, fl, extra):
        return PosteriorResult.from_samples("anlh", epsilon, table.names, tf.backward(samples), weights,
                                            notes + extra, fl)

    if np.any(failed) or not np.all(np.isfinite(stage1)):
        return result(stage1, w, failed, ["stage 1 failed, support filter skipped"])
    keep = support_filter(stage1, cfg.anlh_k, cfg.anlh_rho)
    if keep.all():
        return result(stage1, w, failed, [])
    if keep.sum() < cfg.anlh_min_retained:
        return result(stage1, w, failed, [f"only {int(keep.sum())} rows retained, stage-1 result kept"])
    w2 = w[keep] / w[keep].sum()
    stage2, failed2, notes2 = _nn_adjust(X[keep], P[keep], w2, table.names, cfg, 1)
    return result(stage2, w2, failed2, notes2)


def adjust_rfa(table: ReferenceTable, observed, epsilon: float, config: MethodConfig | None = None,
               scaler: Scaler | None = None) -> PosteriorResult:
    """Homoscedastic adjustment with a random-forest conditional mean.

    The forest is trained without weights on the accepted rows and its
    out-of-bag predictions stand in for the fitted values at each row.
    """
    cfg = config or MethodConfig(epsilon=epsilon)
    obs = _observed(observed)
    kw, idx, scaler = _accept(table, obs, epsilon, scaler)
    S = table.stats[idx]
    w = kw.weights[idx]
    tf = _Transform(cfg.bounds, table.p, cfg.transform == "support")
    P = tf.forward(table.params[idx])
    out = np.empty_like(P)
    for i in range(table.p):
        rf = forest_fit(S, P[:, i], None, cfg.n_trees, cfg.mtry, cfg.min_leaf, _sub_seed(cfg.seed, 2, i))
        out[:, i] = rf.predict(obs[None, :])[0] + (P[:, i] - rf.oob_predict())
    return PosteriorResult.from_samples("rfa", epsilon, table.names, tf.backward(out), w)


def _quantile_result(method, epsilon, names, q, mean, point, failed, notes):
    q = np.asarray(q, dtype=float)
    for i in range(q.shape[0]):
        if not np.all(np.isfinite(q[i])) or not np.isfinite(point[i]):
            failed[i] = True
        elif np.any(np.diff(q[i]) < 0):
            q[i] = np.sort(q[i])
            notes.append(f"{names[i]}: crossing quantiles sorted")
    return PosteriorResult(method, epsilon, names, q, mean, point, failed, warnings=notes)


def fit_uwqrf(table: ReferenceTable, config: MethodConfig | None = None, only: int | None = None) -> list:
    """One quantile forest per parameter on the full table (or just ``only``)."""
    cfg = config or MethodConfig()
    cols = range(table.p) if only is None else [only]
    return [forest_fit(table.stats, table.params[:, i], None, cfg.n_trees, cfg.mtry, cfg.min_leaf,
                       _sub_seed(cfg.seed, 3, i)) for i in cols]


def _qrf_predict(forests, names, obs, method, epsilon) -> PosteriorResult:
    p = len(forests)
    q = np.empty((p, 3))
    mean = np.empty(p)
    for i, rf in enumerate(forests):
        wq = rf.quantile_weights(obs[None, :])[0]
        q[i] = weighted_quantile(rf.y, PROBS, wq)
        mean[i] = float(np.dot(wq, rf.y))
    return _quantile_result(method, epsilon, names, q, mean, q[:, 1].copy(), np.zeros(p, dtype=bool), [])


def quantile_rf(table: ReferenceTable, observed, weighted: bool, epsilon: float | None = None,
                config: MethodConfig | None = None, scaler: Scaler | None = None,
                forests=None) -> PosteriorResult:
    """Quantile regression forests.

    Unweighted: trained on the whole table (``forests`` may hold prefit
    models from :func:`fit_uwqrf`). Weighted: trained on the accepted rows,
    with kernel weights driving the bootstrap and the quantile weights
    (``wqrf_mode="bootstrap"``) or ignored (``"subset"``).
    """
    cfg = config or MethodConfig()
    obs = _observed(observed)
    if not weighted:
        forests = fit_uwqrf(table, cfg) if forests is None else forests
        return _qrf_predict(forests, table.names, obs, "uwqrf", None)
    epsilon = cfg.epsilon if epsilon is None else epsilon
    kw, idx, scaler = _accept(table, obs, epsilon, scaler)
    S = table.stats[idx]
    w = kw.weights[idx] if cfg.wqrf_mode == "bootstrap" else None
    forests = [forest_fit(S, table.params[idx, i], w, cfg.n_trees, cfg.mtry, cfg.min_leaf,
                          _sub_seed(cfg.seed, 4, i)) for i in range(table.p)]
    return _qrf_predict(forests, table.names, obs, "wqrf", epsilon)


def quantile_gbm(table: ReferenceTable, observed, loss: str, epsilon: float,
                 config: MethodConfig | None = None, scaler: Scaler | None = None) -> PosteriorResult:
    """Boosted quantile regression on the accepted rows with kernel weights.

    Three pinball fits give the quantiles; one L1 or L2 fit gives the point
    estimate. Crossing triplets are sorted and flagged.
    """
    loss = loss.lower()
    if loss not in ("l1", "l2"):
        raise ValueError("loss must be 'l1' or 'l2'")
    cfg = config or MethodConfig(epsilon=epsilon)
    obs = _observed(observed)
    kw, idx, scaler = _accept(table, obs, epsilon, scaler)
    S = table.stats[idx]
    w = kw.weights[idx]
    p = table.p
    q = np.full((p, 3), np.nan)
    point = np.full(p, np.nan)
    failed = np.zeros(p, dtype=bool)
    notes = []
    x0 = obs[None, :]
    kwargs = dict(w=w, stages=cfg.gbm_stages, depth=cfg.gbm_depth, learning_rate=cfg.gbm_learning_rate,
                  min_leaf=cfg.gbm_min_leaf, subsample=cfg.gbm_subsample)
    for i in range(p):
        y = table.params[idx, i]
        try:
            for j, a in enumerate(PROBS):
                q[i, j] = gbm_fit(S, y, ("pinball", a), seed=_sub_seed(cfg.seed, 5, i, j), **kwargs).predict(x0)[0]
            point[i] = gbm_fit(S, y, loss, seed=_sub_seed(cfg.seed, 6, i), **kwargs).predict(x0)[0]
        except TrainingError as exc:
            failed[i] = True
            notes.append(f"{table.names[i]}: {exc}")
    mean = point if loss == "l2" else np.full(p, np.nan)
    return _quantile_result(f"qgbm_{loss}", epsilon, table.names, q, mean, point, failed, notes)


def run_method(tag: str, table: ReferenceTable, observed, config: MethodConfig | None = None,
               epsilon: float | None = None, scaler: Scaler | None = None, forests=None) -> PosteriorResult:
    """Dispatch on a method tag from :data:`METHODS`."""
    cfg = config or MethodConfig()
    eps = cfg.epsilon if epsilon is None else float(epsilon)
    if tag not in METHODS:
        raise ValueError(f"unknown method {tag!r}; choose from {sorted(METHODS)}")
    if tag == "rej":
        return rejection(table, observed, eps, scaler)
    if tag == "loclh":
        return adjust_loclh(table, observed, eps, scaler, cfg)
    if tag == "locnlh":
        return adjust_locnlh(table, observed, eps, cfg, scaler)
    if tag == "anlh":
        return adjust_anlh(table, observed, eps, cfg, scaler)
    if tag == "rfa":
        return adjust_rfa(table, observed, eps, cfg, scaler)
    if tag == "wqrf":
        return quantile_rf(table, observed, True, eps, cfg, scaler)
    if tag == "uwqrf":
        return quantile_rf(table, observed, False, None, cfg, forests=forests)
    return quantile_gbm(table, observed, tag.split("_")[1], eps, cfg, scaler)
