"""Priors, survey designs and the Poisson-lognormal observation model."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .cpf import CpfParams, site_intensities
from .errors import ConfigError, FormatError, OracleError
from .landscape import (AttributeMap, CategoryProfile, LandscapeRaster,
                        generate_attribute_maps)

__all__ = [
    "ObsParams",
    "ParamVector",
    "PriorSpec",
    "SurveySite",
    "SurveyDesign",
    "Dataset",
    "FieldStore",
    "param_names",
    "sample_prior",
    "sample_prior_array",
    "sample_counts",
    "simulate_dataset",
    "loglik_oracle",
    "synthetic_design",
    "RATE_CAP",
]

# numpy's Poisson sampler rejects larger rates
RATE_CAP = 1e15


@dataclass(frozen=True)
class ObsParams:
    beta: tuple
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if len(self.beta) < 1:
            raise ValueError("need at least one period effect")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ValueError(f"sigma2 must be finite and > 0, got {self.sigma2}")
        if not all(np.isfinite(self.beta)):
            raise ValueError("period effects must be finite")

    @property
    def n_periods(self) -> int:
        return len(self.beta)

    def log_scale(self, period: int) -> float:
        """Period effect on the log intensity; ``period`` counts from 1."""
        if period == 1:
            return self.beta[0]
        return self.beta[0] + self.beta[period - 1]


def param_names(n_periods: int = 3) -> list[str]:
    return ["tau0", "f0", "a", "b"] + [f"beta{k}" for k in range(1, n_periods + 1)] + ["sigma2"]


@dataclass(frozen=True)
class ParamVector:
    theta: CpfParams
    omega: ObsParams

    @property
    def dim(self) -> int:
        return 4 + self.omega.n_periods + 1

    def names(self) -> list[str]:
        return param_names(self.omega.n_periods)

    def to_array(self) -> np.ndarray:
        return np.array([*self.theta.as_tuple(), *self.omega.beta, self.omega.sigma2])

    @classmethod
    def from_array(cls, values) -> "ParamVector":
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 6:
            raise ValueError("parameter vector must hold at least 6 values")
        return cls(CpfParams(*v[:4]), ObsParams(tuple(v[4:-1]), v[-1]))


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors: truncated lognormal for tau0, lognormal for f0,
    uniforms for a and b, normals for the period effects (``beta_var`` is a
    variance) and an inverse-gamma for sigma2."""

    n_periods: int = 3
    tau0_meanlog: float = math.log(1000.0)
    tau0_sdlog: float = 1.0
    tau0_upper: float = 1000.0
    f0_meanlog: float = math.log(0.1)
    f0_sdlog: float = 1.0
    a_low: float = 100.0
    a_high: float = 1000.0
    b_low: float = 100.0
    b_high: float = 1000.0
    beta_mean: float = 0.0
    beta_var: float = 100.0
    sigma2_shape: float = 1.0
    sigma2_scale: float = 1.0

    def __post_init__(self):
        if self.n_periods < 1:
            raise ConfigError("n_periods must be >= 1")
        if not (self.tau0_sdlog > 0 and self.f0_sdlog > 0 and self.beta_var > 0):
            raise ConfigError("prior scales must be positive")
        if not (self.tau0_upper > 0 and self.a_high > self.a_low > 0 and self.b_high > self.b_low > 0):
            raise ConfigError("invalid prior bounds")
        if not (self.sigma2_shape > 0 and self.sigma2_scale > 0):
            raise ConfigError("inverse-gamma parameters must be positive")

    @property
    def dim(self) -> int:
        return 4 + self.n_periods + 1

    def names(self) -> list[str]:
        return param_names(self.n_periods)

    def marginal_cdfs(self):
        """Analytic marginal CDFs, in parameter order."""
        from scipy import stats

        z_up = (math.log(self.tau0_upper) - self.tau0_meanlog) / self.tau0_sdlog
        norm_up = stats.norm.cdf(z_up)

        def tau0_cdf(x):
            x = np.asarray(x, dtype=float)
            with np.errstate(divide="ignore"):
                z = (np.log(np.clip(x, 1e-300, None)) - self.tau0_meanlog) / self.tau0_sdlog
            return np.clip(stats.norm.cdf(z) / norm_up, 0.0, 1.0) * (x > 0)

        cdfs = [
            tau0_cdf,
            stats.lognorm(s=self.f0_sdlog, scale=math.exp(self.f0_meanlog)).cdf,
            stats.uniform(self.a_low, self.a_high - self.a_low).cdf,
            stats.uniform(self.b_low, self.b_high - self.b_low).cdf,
        ]
        cdfs += [stats.norm(self.beta_mean, math.sqrt(self.beta_var)).cdf] * self.n_periods
        cdfs.append(stats.invgamma(self.sigma2_shape, scale=self.sigma2_scale).cdf)
        return cdfs


def _draw_one(prior: PriorSpec, rng: np.random.Generator) -> np.ndarray:
    out = np.empty(prior.dim)
    while True:
        t = math.exp(prior.tau0_meanlog + prior.tau0_sdlog * rng.standard_normal())
        if t <= prior.tau0_upper:
            break
    out[0] = t
    out[1] = math.exp(prior.f0_meanlog + prior.f0_sdlog * rng.standard_normal())
    out[2] = rng.uniform(prior.a_low, prior.a_high)
    out[3] = rng.uniform(prior.b_low, prior.b_high)
    out[4:4 + prior.n_periods] = prior.beta_mean + math.sqrt(prior.beta_var) * rng.standard_normal(prior.n_periods)
    out[-1] = prior.sigma2_scale / rng.gamma(prior.sigma2_shape)
    return out


def sample_prior(prior: PriorSpec, seed) -> ParamVector:
    """One draw from the joint prior. ``seed`` may also be a Generator."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ParamVector.from_array(_draw_one(prior, rng))


def sample_prior_array(prior: PriorSpec, n: int, seed) -> np.ndarray:
    """``n`` independent prior draws as an ``(n, p)`` array."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = np.empty((n, prior.dim))
    # tau0 by rejection from the untruncated lognormal
    filled = 0
    while filled < n:
        t = np.exp(prior.tau0_meanlog + prior.tau0_sdlog * rng.standard_normal(2 * (n - filled) + 16))
        t = t[t <= prior.tau0_upper][: n - filled]
        out[filled:filled + t.size, 0] = t
        filled += t.size
    out[:, 1] = np.exp(prior.f0_meanlog + prior.f0_sdlog * rng.standard_normal(n))
    out[:, 2] = rng.uniform(prior.a_low, prior.a_high, n)
    out[:, 3] = rng.uniform(prior.b_low, prior.b_high, n)
    out[:, 4:4 + prior.n_periods] = prior.beta_mean + math.sqrt(prior.beta_var) * rng.standard_normal((n, prior.n_periods))
    out[:, -1] = prior.sigma2_scale / rng.gamma(prior.sigma2_shape, size=n)
    return out


# ---------------------------------------------------------------------------
# survey design and data


@dataclass(frozen=True)
class SurveySite:
    id: int
    landscape: str
    habitat: int
    patches: tuple
    exposure: float

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(int(p) for p in self.patches))
        if not self.patches:
            raise ValueError(f"site {self.id} covers no patch")
        if not self.exposure > 0:
            raise ValueError(f"site {self.id}: exposure must be > 0")
        if self.id < 0:
            raise ValueError("site ids must be non-negative")


@dataclass(frozen=True, eq=False)
class SurveyDesign:
    """Sites plus the (site, year, period) keys that are surveyed."""

    sites: tuple
    n_periods: int
    records: tuple  # ((site, year, period), ...) in canonical order

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        ids = [s.id for s in self.sites]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate site ids")
        keys = tuple(sorted((int(i), int(j), int(k)) for i, j, k in self.records))
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (site, year, period) keys")
        known = set(ids)
        for i, _, k in keys:
            if i not in known:
                raise ValueError(f"record refers to unknown site {i}")
            if not 1 <= k <= self.n_periods:
                raise ValueError(f"period {k} outside 1..{self.n_periods}")
        object.__setattr__(self, "records", keys)

    @classmethod
    def full(cls, sites: Sequence[SurveySite], years: Iterable[int], n_periods: int) -> "SurveyDesign":
        years = list(years)
        recs = [(s.id, y, k) for s in sites for y in years for k in range(1, n_periods + 1)]
        return cls(tuple(sites), n_periods, tuple(recs))

    def site(self, site_id: int) -> SurveySite:
        return self._by_id[site_id]

    @property
    def _by_id(self):
        cache = self.__dict__.get("_site_map")
        if cache is None:
            cache = {s.id: s for s in self.sites}
            object.__setattr__(self, "_site_map", cache)
        return cache

    @property
    def years(self) -> list[int]:
        return sorted({j for _, j, _ in self.records})

    @property
    def landscapes(self) -> list[str]:
        return sorted({s.landscape for s in self.sites})

    @property
    def n_records(self) -> int:
        return len(self.records)

    def habitats(self) -> np.ndarray:
        return np.array([self.site(i).habitat for i, _, _ in self.records], dtype=np.int64)

    def exposures(self) -> np.ndarray:
        return np.array([self.site(i).exposure for i, _, _ in self.records])


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed or simulated counts, one per (site, year, period) key."""

    site: np.ndarray
    year: np.ndarray
    period: np.ndarray
    habitat: np.ndarray
    count: np.ndarray

    def __post_init__(self):
        cols = {}
        for name in ("site", "year", "period", "habitat", "count"):
            cols[name] = np.asarray(getattr(self, name), dtype=np.int64).ravel()
            object.__setattr__(self, name, cols[name])
        n = {c.size for c in cols.values()}
        if len(n) != 1:
            raise ValueError("dataset columns differ in length")
        if np.any(self.count < 0):
            raise ValueError("counts must be non-negative")
        keys = set(zip(self.site.tolist(), self.year.tolist(), self.period.tolist()))
        if len(keys) != self.site.size:
            raise ValueError("duplicate (site, year, period) keys")

    def __len__(self):
        return int(self.site.size)

    def keys(self) -> list[tuple]:
        return list(zip(self.site.tolist(), self.year.tolist(), self.period.tolist()))

    def as_mapping(self) -> dict:
        return dict(zip(self.keys(), self.count.tolist()))

    @classmethod
    def from_counts(cls, design: SurveyDesign, counts) -> "Dataset":
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (design.n_records,):
            raise ValueError("one count per design record expected")
        rec = np.array(design.records, dtype=np.int64).reshape(-1, 3)
        return cls(rec[:, 0], rec[:, 1], rec[:, 2], design.habitats(), counts)

    def aligned_counts(self, design: SurveyDesign) -> np.ndarray:
        """Counts in design record order; missing keys become -1."""
        m = self.as_mapping()
        return np.array([m.get(k, -1) for k in design.records], dtype=np.int64)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["site", "year", "period", "habitat", "count"])
            for row in zip(self.site, self.year, self.period, self.habitat, self.count):
                w.writerow([int(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["site", "year", "period", "habitat", "count"]:
                raise FormatError(f"{path}: expected header site,year,period,habitat,count")
            rows = []
            for i, row in enumerate(reader):
                if not row:
                    continue
                try:
                    rows.append([int(v) for v in row])
                except ValueError as exc:
                    raise FormatError(f"{path}: line {i + 2} is not integer") from exc
                if len(rows[-1]) != 5:
                    raise FormatError(f"{path}: line {i + 2} has {len(row)} fields")
        arr = np.array(rows, dtype=np.int64).reshape(-1, 5)
        return cls(*arr.T)


# ---------------------------------------------------------------------------
# landscapes -> site intensities


class FieldStore:
    """Landscapes, their frozen attribute maps, and site-level intensities.

    Attribute maps are drawn once per (landscape, year, period) from
    ``seed`` and cached.
    """

    def __init__(self, rasters: Sequence[LandscapeRaster],
                 profiles: Mapping[int, CategoryProfile], seed: int = 0):
        self.rasters = {r.id: r for r in rasters}
        if len(self.rasters) != len(rasters):
            raise ConfigError("landscape ids must be unique")
        self.profiles = dict(profiles)
        self.seed = int(seed)
        self._maps: dict = {}
        self._plans: dict = {}

    def attributes(self, landscape: str, year: int, period: int) -> AttributeMap:
        key = (landscape, int(year), int(period))
        amap = self._maps.get(key)
        if amap is None:
            raster = self.rasters[landscape]
            idx = sorted(self.rasters).index(landscape)
            ss = np.random.SeedSequence(self.seed, spawn_key=(idx, _nonneg(year), int(period)))
            amap = generate_attribute_maps(raster, self.profiles, int(period) - 1, int(year), ss)
            self._maps[key] = amap
        return amap

    def _plan(self, design: SurveyDesign):
        plan = self._plans.get(id(design))
        if plan is not None and plan[0] is design:
            return plan[1]
        groups: dict = {}
        for r, (i, j, k) in enumerate(design.records):
            site = design.site(i)
            groups.setdefault((site.landscape, j, k), []).append((r, site.patches))
        out = []
        for key in sorted(groups):
            members = groups[key]
            cells = np.unique(np.concatenate([np.array(p, dtype=np.int64) for _, p in members]))
            pos = {c: n for n, c in enumerate(cells.tolist())}
            rows = np.array([r for r, _ in members], dtype=np.int64)
            sel = [np.array([pos[c] for c in p], dtype=np.int64) for _, p in members]
            out.append((key, cells, rows, sel))
        self._plans[id(design)] = (design, out)
        return out

    def record_intensities(self, theta: CpfParams, design: SurveyDesign) -> np.ndarray:
        """Mean ``nu`` over each record's transect patches, in record order."""
        nu = np.empty(design.n_records)
        for (landscape, year, period), cells, rows, sel in self._plan(design):
            amap = self.attributes(landscape, year, period)
            if cells.max() >= amap.floral.size:
                raise ConfigError(f"site patches outside landscape {landscape}")
            vals = site_intensities(amap, theta, cells)
            for r, s in zip(rows, sel):
                nu[r] = vals[s].mean()
        return nu


def _nonneg(v: int) -> int:
    v = int(v)
    return v if v >= 0 else (1 << 32) + v


# ---------------------------------------------------------------------------
# generative model


def sample_counts(nu, exposure, log_scale, sigma2, rng, size=None) -> np.ndarray:
    """Vectorised Poisson-lognormal draws; ``nu == 0`` gives 0 counts."""
    nu = np.asarray(nu, dtype=float)
    shape = np.broadcast_shapes(nu.shape, np.shape(exposure), np.shape(log_scale)) if size is None else size
    eps = rng.normal(0.0, math.sqrt(sigma2), size=shape)
    with np.errstate(divide="ignore", over="ignore"):
        rate = exposure * np.exp(np.log(nu) + log_scale + eps)
    rate = np.where(nu > 0, np.minimum(rate, RATE_CAP), 0.0)
    return rng.poisson(rate).astype(np.int64)


def simulate_dataset(psi: ParamVector, design: SurveyDesign, fields, seed) -> Dataset:
    """Simulate one count per design record.

    ``fields`` is a :class:`FieldStore`, or a mapping from (site, year,
    period) to a precomputed site intensity. Each record draws from its own
    stream keyed by (seed, site, year, period), so record order never
    changes a record's value.
    """
    if isinstance(fields, FieldStore):
        nu = fields.record_intensities(psi.theta, design)
    else:
        try:
            nu = np.array([float(fields[key]) for key in design.records])
        except KeyError as exc:
            raise ConfigError(f"no intensity for record {exc.args[0]}") from None
    return Dataset.from_counts(design, _draw_records(psi, design, nu, seed))


def _draw_records(psi: ParamVector, design: SurveyDesign, nu: np.ndarray, seed) -> np.ndarray:
    if psi.omega.n_periods != design.n_periods:
        raise ConfigError("parameter vector and design disagree on the number of periods")
    seed = int(seed)
    sd = math.sqrt(psi.omega.sigma2)
    counts = np.zeros(design.n_records, dtype=np.int64)
    for r, (i, j, k) in enumerate(design.records):
        v = nu[r]
        if not v > 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, _nonneg(j), k)))
        log_rate = math.log(design.site(i).exposure) + math.log(v) + psi.omega.log_scale(k) + sd * rng.standard_normal()
        rate = math.exp(log_rate) if log_rate < math.log(RATE_CAP) else RATE_CAP
        counts[r] = rng.poisson(rate)
    return counts


def loglik_oracle(y: int, c: float, nu: float, beta_eff: float, sigma2: float,
                  rtol: float = 1e-8) -> float:
    """Log-probability of count ``y`` under the Poisson-lognormal model.

    Integrates over the latent log intensity by adaptive quadrature after
    centring on the integrand's mode. For testing only.
    """
    if y < 0 or not (c > 0 and nu > 0 and sigma2 > 0):
        raise ValueError("need y >= 0 and c, nu, sigma2 > 0")
    y = int(y)
    s = math.sqrt(sigma2)
    m = math.log(c) + math.log(nu) + beta_eff  # mean log Poisson rate

    def h(z):
        u = m + s * z
        if u > 700.0:  # exp(u) dominates: the integrand is zero here
            return -math.inf
        return -0.5 * z * z + y * u - math.exp(u)

    # mode of h: the score -z + s*y - s*exp(m + s z) is strictly decreasing
    def score(z):
        return -z + s * y - s * math.exp(min(m + s * z, 700.0))

    lo, hi = -1.0, 1.0
    while score(lo) < 0:
        lo *= 2.0
    while score(hi) > 0:
        hi *= 2.0
    z = optimize.brentq(score, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    hz = h(z)
    width = 1.0 / math.sqrt(1.0 + s * s * math.exp(min(m + s * z, 700.0)))

    def f(t):
        return math.exp(h(z + t) - hz)

    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for lo, hi in ((-40.0 * width, 0.0), (0.0, 40.0 * width)):
                val, err = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=rtol * 0.1, limit=500)
                if not np.isfinite(val) or err > rtol * max(val, 1e-300):
                    raise OracleError(f"quadrature error {err:g} for value {val:g}")
                total += val
        except integrate.IntegrationWarning as exc:
            raise OracleError(str(exc)) from exc
    # beyond +-40 local widths the integrand is below exp(-800) of its peak
    return hz + math.log(total) - 0.5 * math.log(2 * math.pi) - special.gammaln(y + 1)


# ---------------------------------------------------------------------------
# synthetic survey designs


def synthetic_design(rasters: Sequence[LandscapeRaster], habitats: Sequence[int],
                     transects_per_habitat: int = 2, years: Sequence[int] = (0, 1),
                     n_periods: int = 3, transect_cells: int = 3,
                     exposure: float = 15.0 * 150.0, window: float = 0.5,
                     seed=0) -> SurveyDesign:
    """Transects placed on habitat cells near each landscape's centre.

    A transect is a horizontal run of ``transect_cells`` cells starting on a
    cell of the habitat category inside the central ``window`` fraction of
    the raster (falling back to the whole raster). Habitats absent from a
    landscape get no transect there.
    """
    rng = np.random.default_rng(seed)
    sites = []
    sid = 0
    for raster in rasters:
        h, w = raster.landuse.shape
        r_lo, r_hi = int(h * (1 - window) / 2), int(math.ceil(h * (1 + window) / 2))
        c_lo, c_hi = int(w * (1 - window) / 2), int(math.ceil(w * (1 + window) / 2))
        for hab in habitats:
            cand = np.argwhere(raster.landuse[r_lo:r_hi, c_lo:c_hi] == hab) + [r_lo, c_lo]
            if cand.size == 0:
                cand = np.argwhere(raster.landuse == hab)
            if cand.size == 0:
                continue
            picks = rng.choice(len(cand), size=min(transects_per_habitat, len(cand)), replace=False)
            for p in sorted(picks.tolist()):
                r, c = cand[p]
                c0 = min(c, max(0, w - transect_cells))
                cells = [r * w + cc for cc in range(c0, min(w, c0 + transect_cells))]
                sites.append(SurveySite(sid, raster.id, int(hab), tuple(cells), float(exposure)))
                sid += 1
    if not sites:
        raise ConfigError("no habitat cell found in any landscape")
    return SurveyDesign.full(sites, years, n_periods)
