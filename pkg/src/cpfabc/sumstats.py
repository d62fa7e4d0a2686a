"""Summary statistics, robust scaling and Epanechnikov kernel weights."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .obsmodel import Dataset, SurveyDesign

__all__ = [
    "SummarySpec",
    "SummaryVector",
    "Scaler",
    "KernelWeights",
    "build_spec",
    "summarize",
    "summarize_counts",
    "scale_statistics",
    "kernel_weights",
    "weights_from_distances",
]


@dataclass(frozen=True, eq=False)
class SummarySpec:
    """Fixed grouping of design records.

    ``groups`` is a tuple of ``(label, record_indices)``; each group
    contributes its interquartile range then its zero count.
    """

    groups: tuple
    n_records: int
    keys: tuple  # design record keys, to align datasets

    @property
    def dim(self) -> int:
        return 2 * len(self.groups)

    def names(self) -> list[str]:
        out = []
        for label, _ in self.groups:
            tag = "_".join(str(x) for x in label)
            out += [f"iqr_{tag}", f"zeros_{tag}"]
        return out

    @property
    def hash(self) -> str:
        cached = self.__dict__.get("_hash")
        if cached is None:
            payload = {
                "groups": [[list(map(str, lab)), [int(i) for i in idx]] for lab, idx in self.groups],
                "keys": [list(k) for k in self.keys],
            }
            blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
            cached = hashlib.sha256(blob).hexdigest()
            object.__setattr__(self, "_hash", cached)
        return cached

    def _fast_layout(self):
        cached = self.__dict__.get("_layout")
        if cached is None:
            by_size: dict = {}
            for g, (_, idx) in enumerate(self.groups):
                by_size.setdefault(len(idx), []).append(g)
            cached = []
            for size, gs in sorted(by_size.items()):
                idx = np.array([self.groups[g][1] for g in gs], dtype=np.int64).reshape(len(gs), size)
                cached.append((np.array(gs, dtype=np.int64), idx))
            object.__setattr__(self, "_layout", cached)
        return cached


@dataclass(frozen=True, eq=False)
class SummaryVector:
    values: np.ndarray
    spec_id: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("summary statistics must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def build_spec(design: SurveyDesign) -> SummarySpec:
    """Groups by (landscape, year, period) pooling habitats, then by
    (habitat, year, period) pooling landscapes.

    The lattice is the full cross product of the labels present in the
    design, so groups with no record are kept (they yield the (0, 0)
    sentinel).
    """
    landscapes = design.landscapes
    habitats = sorted({s.habitat for s in design.sites})
    years = design.years
    periods = list(range(1, design.n_periods + 1))
    by_land: dict = {}
    by_hab: dict = {}
    for r, (i, j, k) in enumerate(design.records):
        s = design.site(i)
        by_land.setdefault((s.landscape, j, k), []).append(r)
        by_hab.setdefault((s.habitat, j, k), []).append(r)
    groups = []
    for lnd in landscapes:
        for j in years:
            for k in periods:
                groups.append((("L", lnd, j, k), tuple(by_land.get((lnd, j, k), ()))))
    for hab in habitats:
        for j in years:
            for k in periods:
                groups.append((("H", hab, j, k), tuple(by_hab.get((hab, j, k), ()))))
    return SummarySpec(tuple(groups), design.n_records, design.records)


def _group_stats(y: np.ndarray) -> tuple[float, float]:
    if y.size == 0:
        return 0.0, 0.0
    q1, q3 = np.percentile(y, [25, 75])
    return float(q3 - q1), float(np.count_nonzero(y == 0))


def summarize_counts(counts: np.ndarray, spec: SummarySpec) -> np.ndarray:
    """Statistics for one or many count vectors in design record order.

    ``counts`` has shape ``(n_records,)`` or ``(n, n_records)``.
    """
    y = np.asarray(counts, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[1] != spec.n_records:
        raise ValueError(f"expected {spec.n_records} counts per row, got {y.shape[1]}")
    out = np.zeros((y.shape[0], spec.dim))
    for gs, idx in spec._fast_layout():
        if idx.shape[1] == 0:
            continue
        block = y[:, idx]  # (n, groups, size)
        q1, q3 = np.percentile(block, [25, 75], axis=2)
        out[:, 2 * gs] = q3 - q1
        out[:, 2 * gs + 1] = np.count_nonzero(block == 0, axis=2)
    return out[0] if single else out


def summarize(data: Dataset, spec: SummarySpec) -> SummaryVector:
    """Summary vector of ``data``; records absent from the dataset are left
    out of their group."""
    counts = data.as_mapping()
    y = [counts.get(k) for k in spec.keys]
    if all(v is not None for v in y):
        return SummaryVector(summarize_counts(np.array(y, dtype=float), spec), spec.hash)
    vals = []
    for _, idx in spec.groups:
        sel = np.array([y[i] for i in idx if y[i] is not None], dtype=float)
        vals.extend(_group_stats(sel))
    return SummaryVector(np.array(vals), spec.hash)


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True, eq=False)
class Scaler:
    center: np.ndarray
    spread: np.ndarray

    def transform(self, s) -> np.ndarray:
        return (np.asarray(s, dtype=float) - self.center) / self.spread


SPREAD_FLOOR = 1e-12


def scale_statistics(table) -> Scaler:
    """Median / unnormalised MAD per coordinate.

    When the MAD is zero but the column is not constant (more than half the
    values tie at the median) the mean absolute deviation about the median
    is used instead, so rare but informative deviations still count. Truly
    constant columns get spread 1 and scale to 0.
    """
    t = np.atleast_2d(np.asarray(table, dtype=float))
    if t.shape[0] == 0:
        raise ValueError("cannot scale an empty table")
    center = np.median(t, axis=0)
    dev = np.abs(t - center)
    spread = np.median(dev, axis=0)
    zero = spread <= SPREAD_FLOOR
    if np.any(zero):
        alt = dev[:, zero].mean(axis=0)
        spread[zero] = np.where(alt > SPREAD_FLOOR, alt, 1.0)
    return Scaler(center, spread)


# ---------------------------------------------------------------------------
# kernel weights


@dataclass(frozen=True, eq=False)
class KernelWeights:
    weights: np.ndarray
    bandwidth: float
    epsilon: float
    distances: np.ndarray

    @property
    def support(self) -> np.ndarray:
        """Indices with positive weight."""
        return np.flatnonzero(self.weights > 0)


def weights_from_distances(d, epsilon: float) -> KernelWeights:
    d = np.asarray(d, dtype=float)
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    m = d.size
    if m == 0:
        raise ValueError("no reference rows")
    k = max(1, int(math.ceil(epsilon * m - 1e-9)))
    h = float(np.partition(d, k - 1)[k - 1])
    inside = d < h
    if not np.any(inside):
        # ties at the bandwidth (including all-equal distances): uniform over d <= h
        w = (d <= h).astype(float)
    else:
        w = np.zeros(m)
        w[inside] = 1.0 - (d[inside] / h) ** 2
    w /= w.sum()
    return KernelWeights(w, h, float(epsilon), d)


def kernel_weights(table, observed, epsilon: float, scaler: Scaler | None = None) -> KernelWeights:
    """Epanechnikov weights of the rows of ``table`` around ``observed``.

    Both are scaled with ``scaler`` (fitted on ``table`` when omitted);
    the bandwidth is the ceil(epsilon*M)-th smallest Euclidean distance.
    """
    t = np.atleast_2d(np.asarray(table, dtype=float))
    obs = observed.values if isinstance(observed, SummaryVector) else np.asarray(observed, dtype=float)
    if scaler is None:
        scaler = scale_statistics(t)
    z = scaler.transform(t) - scaler.transform(obs)
    d = np.sqrt(np.einsum("ij,ij->i", z, z))
    return weights_from_distances(d, epsilon)
