"""Central-place-foraging visitation model.

For a nest in cell ``i`` and a flower cell ``j`` at distance ``d_ij``::

    g_j        = 1 - f0 / f_j                      (f_j >= f0, else skipped)
    Delta_ij   = tau0 * g_j - d_ij
    s_i        = sum_j max(Delta_ij, 0)
    tau_i      = tau0 / (1 + exp((sqrt(s_i) - a) / b))
    Delta*_ij  = tau_i * g_j - d_ij
    r_(i->j)   = q_i * Delta*_ij / sum_(j': Delta*_ij' > 0) Delta*_ij'
    nu_j       = sum_i r_(i->j)

Only cells with ``d_ij < tau0 * max(g)`` can contribute to ``s_i`` and only
cells with ``d_ij < tau_i * max(g)`` to the foraging split, so every pass
scans a disc around the nest row by row instead of the whole grid.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .landscape import AttributeMap

__all__ = [
    "CpfParams",
    "VisitationField",
    "max_flight_distance",
    "suitability",
    "nest_specific_distance",
    "visitation_field",
    "site_intensities",
]


@dataclass(frozen=True)
class CpfParams:
    tau0: float
    f0: float
    a: float
    b: float

    def __post_init__(self):
        for name in ("tau0", "f0", "a", "b"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"CpfParams.{name} must be finite and > 0, got {v}")

    def as_tuple(self):
        return (float(self.tau0), float(self.f0), float(self.a), float(self.b))


@dataclass(frozen=True, eq=False)
class VisitationField:
    nu: np.ndarray
    tau_nest: np.ndarray
    suitability: np.ndarray
    resolution: float


def max_flight_distance(f, params: CpfParams):
    """Largest distance a bee flies for a patch of floral quality ``f``."""
    f = np.asarray(f, dtype=float)
    assert np.all(f >= params.f0), "floral quality below f0"
    out = params.tau0 * (1.0 - params.f0 / f)
    return float(out) if out.ndim == 0 else out


def nest_specific_distance(s, params: CpfParams):
    z = (np.sqrt(np.asarray(s, dtype=float)) - params.a) / params.b
    # tau0 * expit(-z), written to avoid overflow
    out = params.tau0 * np.where(z > 0, np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))),
                                 1.0 / (1.0 + np.exp(-np.abs(z))))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True)
def _gain(floral, f0):
    h, w = floral.shape
    g = np.zeros((h, w))
    gmax = 0.0
    for r in range(h):
        for c in range(w):
            f = floral[r, c]
            if f >= f0:
                v = 1.0 - f0 / f
                g[r, c] = v
                if v > gmax:
                    gmax = v
    return g, gmax


@nb.njit(cache=True, inline="always")
def _tau(s, tau0, a, b):
    z = (math.sqrt(s) - a) / b
    if z > 0:
        e = math.exp(-z)
        return tau0 * e / (1.0 + e)
    return tau0 / (1.0 + math.exp(z))


@nb.njit(cache=True)
def _disc_sum(g, dist, r0, c0, scale, radius, res):
    """sum over cells j with d < radius of max(scale*g_j - d, 0), row-major."""
    h, w = g.shape
    total = 0.0
    rc = radius / res
    dr_max = int(math.floor(rc + 1e-9))
    for r in range(max(0, r0 - dr_max), min(h - 1, r0 + dr_max) + 1):
        dr = r - r0
        rem = rc * rc - dr * dr
        if rem < 0:
            continue
        dc_max = int(math.floor(math.sqrt(rem) + 1e-9))
        drow = dist[abs(dr)]
        grow = g[r]
        # g_j = 0 gives v <= 0, so no branch on flower cells is needed
        for c in range(max(0, c0 - dc_max), c0):
            total += max(scale * grow[c] - drow[c0 - c], 0.0)
        for c in range(c0, min(w - 1, c0 + dc_max) + 1):
            total += max(scale * grow[c] - drow[c - c0], 0.0)
    return total


@nb.njit(cache=True)
def _nest_pass(g, dist, gmax, nesting, need_s, res, tau0, a, b):
    """Suitability where ``need_s``; nest distance and the normalising sum of
    positive Delta* for every nest flagged in ``need_s``."""
    h, w = g.shape
    s = np.zeros((h, w))
    tau = np.zeros((h, w))
    z = np.zeros((h, w))
    r1 = tau0 * gmax
    for r in range(h):
        for c in range(w):
            if not need_s[r, c]:
                continue
            si = _disc_sum(g, dist, r, c, tau0, r1, res)
            s[r, c] = si
            ti = _tau(si, tau0, a, b)
            tau[r, c] = ti
            if nesting[r, c] > 0.0:
                z[r, c] = _disc_sum(g, dist, r, c, ti, ti * gmax, res)
    return s, tau, z


@nb.njit(cache=True)
def _reach_mask(nesting, cells, radius, res):
    """Nests closer than ``radius`` to at least one of ``cells``."""
    h, w = nesting.shape
    mask = np.zeros((h, w), dtype=np.bool_)
    rc = radius / res
    dr_max = int(math.floor(rc + 1e-9))
    for k in range(cells.shape[0]):
        r0 = cells[k] // w
        c0 = cells[k] % w
        for r in range(max(0, r0 - dr_max), min(h - 1, r0 + dr_max) + 1):
            dr = r - r0
            rem = rc * rc - dr * dr
            if rem < 0:
                continue
            dc_max = int(math.floor(math.sqrt(rem) + 1e-9))
            for c in range(max(0, c0 - dc_max), min(w - 1, c0 + dc_max) + 1):
                if nesting[r, c] > 0.0:
                    mask[r, c] = True
    return mask


@nb.njit(cache=True)
def _spread(g, dist, gmax, nesting, tau, z, res):
    h, w = g.shape
    nu = np.zeros((h, w))
    for r0 in range(h):
        for c0 in range(w):
            q = nesting[r0, c0]
            zi = z[r0, c0]
            if q <= 0.0 or zi <= 0.0:
                continue
            ti = tau[r0, c0]
            rc = ti * gmax / res
            dr_max = int(math.floor(rc + 1e-9))
            for r in range(max(0, r0 - dr_max), min(h - 1, r0 + dr_max) + 1):
                dr = r - r0
                rem = rc * rc - dr * dr
                if rem < 0:
                    continue
                dc_max = int(math.floor(math.sqrt(rem) + 1e-9))
                for c in range(max(0, c0 - dc_max), min(w - 1, c0 + dc_max) + 1):
                    gj = g[r, c]
                    if gj <= 0.0:
                        continue
                    v = ti * gj - dist[abs(dr), abs(c - c0)]
                    if v > 0.0:
                        nu[r, c] += q * v / zi
    return nu


@nb.njit(cache=True)
def _gather(g, dist, gmax, nesting, tau, z, res, tau0, cells):
    """nu at the listed flat cell ids, summing nests in row-major order."""
    h, w = g.shape
    out = np.zeros(cells.shape[0])
    for k in range(cells.shape[0]):
        r0 = cells[k] // w
        c0 = cells[k] % w
        gj = g[r0, c0]
        if gj <= 0.0:
            continue
        # a nest reaches j only if d < tau_i * g_j <= tau0 * g_j
        rc = tau0 * gj / res
        dr_max = int(math.floor(rc + 1e-9))
        acc = 0.0
        for r in range(max(0, r0 - dr_max), min(h - 1, r0 + dr_max) + 1):
            dr = r - r0
            rem = rc * rc - dr * dr
            if rem < 0:
                continue
            dc_max = int(math.floor(math.sqrt(rem) + 1e-9))
            for c in range(max(0, c0 - dc_max), min(w - 1, c0 + dc_max) + 1):
                q = nesting[r, c]
                zi = z[r, c]
                if q <= 0.0 or zi <= 0.0:
                    continue
                v = tau[r, c] * gj - dist[abs(dr), abs(c - c0)]
                if v > 0.0:
                    acc += q * v / zi
        out[k] = acc
    return out


# ---------------------------------------------------------------------------
# public operations


@functools.lru_cache(maxsize=32)
def _distance_table(h: int, w: int, res: float) -> np.ndarray:
    """``dist[dr, dc]`` = centroid distance in meters for row/col offsets."""
    dr = np.arange(h, dtype=np.float64)[:, None]
    dc = np.arange(w, dtype=np.float64)[None, :]
    out = res * np.sqrt(dr * dr + dc * dc)
    out.setflags(write=False)
    return out


def suitability(nest_patch: int, attrs: AttributeMap, params: CpfParams) -> float:
    """Suitability ``s_i`` of the cell with flat (row-major) id ``nest_patch``."""
    h, w = attrs.shape
    if not 0 <= nest_patch < h * w:
        raise IndexError(f"patch {nest_patch} outside a {h}x{w} raster")
    tau0, f0, _, _ = params.as_tuple()
    g, gmax = _gain(attrs.floral, f0)
    r, c = divmod(int(nest_patch), w)
    dist = _distance_table(h, w, attrs.resolution)
    return float(_disc_sum(g, dist, r, c, tau0, tau0 * gmax, attrs.resolution))


def visitation_field(attrs: AttributeMap, params: CpfParams) -> VisitationField:
    """Visitation intensity, suitability and nest distance for every cell."""
    tau0, f0, a, b = params.as_tuple()
    g, gmax = _gain(attrs.floral, f0)
    dist = _distance_table(*attrs.shape, attrs.resolution)
    need = np.ones(attrs.shape, dtype=np.bool_)
    s, tau, z = _nest_pass(g, dist, gmax, attrs.nesting, need, attrs.resolution, tau0, a, b)
    nu = _spread(g, dist, gmax, attrs.nesting, tau, z, attrs.resolution)
    return VisitationField(nu, tau, s, attrs.resolution)


def site_intensities(attrs: AttributeMap, params: CpfParams, cells: np.ndarray) -> np.ndarray:
    """``nu`` at the given flat cell ids only.

    Equal to ``visitation_field(attrs, params).nu.ravel()[cells]`` but skips
    suitability for non-nest cells and the full spreading pass.
    """
    tau0, f0, a, b = params.as_tuple()
    g, gmax = _gain(attrs.floral, f0)
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    dist = _distance_table(*attrs.shape, attrs.resolution)
    # only nests within tau0 * max(g) of a requested cell can reach it
    need = _reach_mask(attrs.nesting, cells, tau0 * gmax, attrs.resolution)
    _, tau, z = _nest_pass(g, dist, gmax, attrs.nesting, need, attrs.resolution, tau0, a, b)
    return _gather(g, dist, gmax, attrs.nesting, tau, z, attrs.resolution, tau0, cells)
