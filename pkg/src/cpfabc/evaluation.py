"""Simulation-study metrics, posterior-predictive checks and reconstruction
of a distribution from three quantiles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats

from .abc import PosteriorResult
from .errors import PredictiveFailure
from .obsmodel import Dataset, FieldStore, ParamVector, SurveyDesign, simulate_dataset

__all__ = [
    "rae",
    "coverage",
    "average_ranks",
    "GlnDist",
    "fit_gln",
    "PredictiveEnsemble",
    "posterior_predictive",
    "bayes_pvalues",
    "PcaResult",
    "pca_check",
    "StudyRecord",
    "SimStudyReport",
    "RAE_PLOT_CAP",
]

RAE_PLOT_CAP = 2.0  # plots of RAE are truncated here


def rae(estimate: float, truth: float) -> float:
    """|estimate - truth| / |truth|; NaN when ``truth == 0``."""
    if truth == 0:
        return math.nan
    return abs(estimate - truth) / abs(truth)


def coverage(intervals, truths, failed=None) -> float:
    """Share of non-failed cases whose interval ``[lo, hi]`` holds the truth."""
    iv = np.atleast_2d(np.asarray(intervals, dtype=float))
    t = np.asarray(truths, dtype=float).ravel()
    if iv.size == 0 or t.size == 0:
        raise ValueError("no interval to score")
    if iv.shape != (t.size, 2):
        raise ValueError("one (low, high) pair per truth expected")
    ok = np.ones(t.size, dtype=bool) if failed is None else ~np.asarray(failed, dtype=bool)
    if not ok.any():
        raise ValueError("every case failed; coverage undefined")
    inside = (iv[ok, 0] <= t[ok]) & (t[ok] <= iv[ok, 1])
    return float(inside.mean())


def average_ranks(scores) -> np.ndarray:
    """Rank methods (rows) within each parameter (column), smaller score
    first, ties sharing their mean rank; returns the mean rank per method.
    NaN scores rank last."""
    s = np.asarray(scores, dtype=float)
    filled = np.where(np.isnan(s), np.inf, s)
    ranks = np.column_stack([stats.rankdata(filled[:, j], method="average") for j in range(s.shape[1])])
    return ranks.mean(axis=1)


# ---------------------------------------------------------------------------
# three-quantile distributions


@dataclass(frozen=True)
class GlnDist:
    """``c * X + d`` with ``X`` standard normal (``shape="normal"``) or
    lognormal(mu, sigma) (``c = +1`` right skew, ``c = -1`` left skew)."""

    shape: str
    d: float
    c: float
    mu: float = 0.0
    sigma: float = 0.0

    @property
    def median(self) -> float:
        if self.shape == "normal":
            return self.d
        return self.d + self.c * math.exp(self.mu)

    def ppf(self, p) -> np.ndarray:
        z = special.ndtri(np.asarray(p, dtype=float))
        if self.shape == "normal":
            return self.d + self.c * z
        # d + c*exp(mu + sigma*z) written around the median
        return self.median + self.c * math.exp(self.mu) * np.expm1(self.c * self.sigma * z)

    def rvs(self, size, rng) -> np.ndarray:
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        return self.ppf(rng.random(size))


def fit_gln(q_low: float, q_med: float, q_high: float, alpha: float = 0.025, tol: float = 1e-6) -> GlnDist:
    """Normal or shifted (possibly reflected) lognormal matching the
    ``alpha``, 0.5 and ``1 - alpha`` quantiles."""
    if not (np.isfinite(q_low) and np.isfinite(q_med) and np.isfinite(q_high)):
        raise ValueError("quantiles must be finite")
    if not q_low < q_med < q_high:
        raise ValueError("quantiles must be strictly increasing")
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    z = float(special.ndtri(1 - alpha))
    r = (q_high - q_med) / (q_med - q_low)
    lr = math.log(r)
    if abs(lr) < tol:
        return GlnDist("normal", q_med, (q_high - q_low) / (2 * z))
    sigma = abs(lr) / z
    e_mu = (q_high - q_low) / (2 * math.sinh(sigma * z))
    if lr > 0:
        return GlnDist("lognormal-right", q_med - e_mu, 1.0, math.log(e_mu), sigma)
    return GlnDist("lognormal-left", q_med + e_mu, -1.0, math.log(e_mu), sigma)


# ---------------------------------------------------------------------------
# posterior predictive checks


@dataclass(frozen=True, eq=False)
class PredictiveEnsemble:
    params: np.ndarray  # (n_draws, p)
    counts: np.ndarray  # (n_draws, n_records), design record order
    design: SurveyDesign
    redraws: int = 0

    def __len__(self):
        return self.counts.shape[0]

    def datasets(self) -> list[Dataset]:
        return [Dataset.from_counts(self.design, c) for c in self.counts]


def _valid(row, bounds) -> bool:
    try:
        ParamVector.from_array(row)
    except ValueError:
        return False
    if bounds:
        for v, (lo, hi) in zip(row, bounds):
            if not lo <= v <= hi:
                return False
    return True


def _param_draws(result: PosteriorResult, n: int, rng, bounds, max_redraw: int):
    p = len(result.names)
    if result.any_failed:
        raise PredictiveFailure(f"{result.label}: failed parameters, no predictive draws")
    if result.samples is not None:
        def draw(k):
            return result.samples[rng.choice(result.samples.shape[0], size=k, p=result.weights)]
    else:
        try:
            dists = [fit_gln(*result.quantiles[i]) for i in range(p)]
        except ValueError as exc:
            raise PredictiveFailure(f"{result.label}: {exc}") from exc

        def draw(k):
            return np.column_stack([d.rvs(k, rng) for d in dists])

    out = draw(n)
    redraws = 0
    bad = np.array([not _valid(r, bounds) for r in out], dtype=bool)
    while bad.any():
        if redraws >= max_redraw:
            raise PredictiveFailure(f"{result.label}: draws keep leaving the parameter support")
        out[bad] = draw(int(bad.sum()))
        bad[bad] = [not _valid(r, bounds) for r in out[bad]]
        redraws += 1
    return out, redraws


def posterior_predictive(result: PosteriorResult, design: SurveyDesign, fields: FieldStore,
                         n_draws: int, seed, bounds: Sequence = (), max_redraw: int = 100) -> PredictiveEnsemble:
    """Simulate ``n_draws`` datasets from posterior parameter draws.

    Sample-based results are resampled by weight; quantile results are
    sampled parameter-wise (independently) from their three-quantile
    fits. Draws outside the model's parameter space (or ``bounds``) are
    redrawn, at most ``max_redraw`` rounds.
    """
    p = len(result.names)
    if n_draws == 0:
        return PredictiveEnsemble(np.empty((0, p)), np.empty((0, design.n_records), dtype=np.int64), design)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, 17]))
    params, redraws = _param_draws(result, int(n_draws), rng, bounds, max_redraw)
    sim_seeds = rng.integers(0, 2**31 - 1, size=n_draws)
    counts = np.empty((n_draws, design.n_records), dtype=np.int64)
    for k in range(n_draws):
        ds = simulate_dataset(ParamVector.from_array(params[k]), design, fields, int(sim_seeds[k]))
        counts[k] = ds.count
    return PredictiveEnsemble(params, counts, design, redraws)


def bayes_pvalues(ensemble, observed, rng=None) -> np.ndarray:
    """Per record: P(pred < obs) + P(pred = obs) / 2.

    With ``rng`` the tie share is split by a uniform draw instead of
    halved (randomized PIT), which is exactly uniform under a correct
    predictive distribution even when counts pile up on a few values.
    """
    if isinstance(ensemble, PredictiveEnsemble):
        pred = ensemble.counts
        obs = observed.aligned_counts(ensemble.design) if isinstance(observed, Dataset) else np.asarray(observed)
    else:
        pred = np.atleast_2d(np.asarray(ensemble))
        obs = observed.count if isinstance(observed, Dataset) else np.asarray(observed)
    if pred.shape[0] == 0:
        raise ValueError("empty predictive ensemble")
    obs = np.asarray(obs).ravel()
    if pred.shape[1] != obs.size:
        raise ValueError("ensemble and observation differ in length")
    share = 0.5 if rng is None else np.random.default_rng(rng).random(obs.size)
    return (pred < obs).mean(axis=0) + share * (pred == obs).mean(axis=0)


@dataclass(frozen=True, eq=False)
class PcaResult:
    components: np.ndarray  # (k, D), orthonormal rows
    explained: np.ndarray  # variance fractions of all components
    table: np.ndarray  # (M, k)
    predicted: np.ndarray
    observed: np.ndarray


def pca_check(table_stats, predicted_stats, observed_stats, n_components: int = 3) -> PcaResult:
    """PCA of the table statistics (columns standardised by table mean and
    SD) with predictions and observation projected on the leading axes."""
    T = np.atleast_2d(np.asarray(table_stats, dtype=float))
    if T.shape[0] < 2:
        raise ValueError("need at least two table rows")
    mu = T.mean(axis=0)
    sd = T.std(axis=0, ddof=1)
    sd = np.where(sd > 0, sd, 1.0)
    Z = (T - mu) / sd
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    k = min(n_components, vt.shape[0])
    comp = vt[:k]
    ev = s * s
    explained = ev / ev.sum() if ev.sum() > 0 else np.zeros_like(ev)

    def proj(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.size == 0:
            return np.empty((0, k))
        return ((X - mu) / sd) @ comp.T

    return PcaResult(comp, explained, Z @ comp.T, proj(predicted_stats), proj(observed_stats)[0])


# ---------------------------------------------------------------------------
# simulation-study report


@dataclass(frozen=True)
class StudyRecord:
    method: str  # display label including epsilon, e.g. "Rej 2.5%"
    ref: int  # table row used as pseudo-observation
    parameter: str
    truth: float
    q_low: float
    q_med: float
    q_high: float
    point: float
    failed: bool


def method_label(result: PosteriorResult) -> str:
    if result.epsilon is None:
        return result.label
    return f"{result.label} {100 * result.epsilon:g}%"


@dataclass(frozen=True, eq=False)
class SimStudyReport:
    records: tuple
    parameters: tuple
    methods: tuple  # labels, in run order

    @classmethod
    def from_results(cls, results: Sequence[tuple], parameters: Sequence[str]) -> "SimStudyReport":
        """``results`` holds ``(ref_row, truth_vector, PosteriorResult)``."""
        recs, methods = [], []
        for ref, truth, res in results:
            lab = method_label(res)
            if lab not in methods:
                methods.append(lab)
            for i, name in enumerate(res.names):
                q = res.quantiles[i]
                recs.append(StudyRecord(lab, int(ref), name, float(truth[i]), float(q[0]), float(q[1]),
                                        float(q[2]), float(res.point[i]), bool(res.failed[i])))
        return cls(tuple(recs), tuple(parameters), tuple(methods))

    def _cells(self, method, parameter):
        return [r for r in self.records if r.method == method and r.parameter == parameter]

    def rae_values(self, method, parameter) -> np.ndarray:
        return np.array([rae(r.point, r.truth) for r in self._cells(method, parameter) if not r.failed])

    def median_rae(self, method, parameter) -> float:
        v = self.rae_values(method, parameter)
        v = v[np.isfinite(v)]
        return float(np.median(v)) if v.size else math.nan

    def coverage(self, method, parameter) -> float:
        cells = self._cells(method, parameter)
        ok = [r for r in cells if not r.failed]
        if not ok:
            return math.nan
        return coverage([[r.q_low, r.q_high] for r in ok], [r.truth for r in ok])

    def failure_rate(self, method, parameter=None) -> float:
        """Failed share over datasets, averaged over parameters when
        ``parameter`` is None."""
        params = self.parameters if parameter is None else (parameter,)
        rates = []
        for par in params:
            cells = self._cells(method, par)
            if cells:
                rates.append(np.mean([r.failed for r in cells]))
        return float(np.mean(rates)) if rates else math.nan

    def ranks(self) -> dict:
        scores = np.array([[self.median_rae(m, p) for p in self.parameters] for m in self.methods])
        return dict(zip(self.methods, average_ranks(scores)))

    def summary_rows(self) -> list[dict]:
        ranks = self.ranks()
        rows = []
        for m in self.methods:
            row = {"method": m}
            for p in self.parameters:
                row[f"coverage_{p}"] = self.coverage(m, p)
            for p in self.parameters:
                row[f"median_rae_{p}"] = self.median_rae(m, p)
            row["failure_pct"] = 100.0 * self.failure_rate(m)
            row["average_rank"] = ranks[m]
            rows.append(row)
        return rows

    def write(self, directory) -> dict:
        """Table-style summary plus long-format RAE records."""
        import os

        os.makedirs(directory, exist_ok=True)
        paths = {"summary": os.path.join(directory, "simstudy_summary.csv"),
                 "records": os.path.join(directory, "simstudy_records.csv")}
        rows = self.summary_rows()
        with open(paths["summary"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = list(rows[0]) if rows else ["method"]
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in cols])
        with open(paths["records"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "ref", "parameter", "truth", "q2.5", "q50", "q97.5", "point", "rae",
                        "rae_capped", "failure"])
            for r in self.records:
                e = rae(r.point, r.truth) if not r.failed else math.nan
                w.writerow([r.method, r.ref, r.parameter, _fmt(r.truth), _fmt(r.q_low), _fmt(r.q_med),
                            _fmt(r.q_high), _fmt(r.point), _fmt(e), _fmt(min(e, RAE_PLOT_CAP)), int(r.failed)])
        return paths


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
