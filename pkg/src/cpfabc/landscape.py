"""Rasterized landscapes, land-use profiles and per-period attribute maps."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, FormatError

__all__ = [
    "LandscapeRaster",
    "AttributeMap",
    "CategoryProfile",
    "Patch",
    "generate_attribute_maps",
    "patch_index",
    "load_raster",
    "save_raster",
    "save_grid",
    "load_grid",
    "synthetic_raster",
    "default_profiles",
]


@dataclass(frozen=True, eq=False)
class LandscapeRaster:
    """Grid of land-use category ids.

    ``landuse`` has shape ``(height, width)``; cell ``(row, col)`` covers
    ``[col*res, (col+1)*res) x [row*res, (row+1)*res)`` in meters.
    """

    landuse: np.ndarray
    resolution: float
    id: str = "landscape"

    def __post_init__(self):
        grid = np.asarray(self.landuse)
        if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
            raise ValueError("landuse must be a non-empty 2-D grid")
        if not np.issubdtype(grid.dtype, np.integer):
            if not np.all(grid == np.round(grid)):
                raise ValueError("landuse must hold integer category ids")
        grid = grid.astype(np.int64)
        grid.setflags(write=False)
        object.__setattr__(self, "landuse", grid)
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def height(self) -> int:
        return self.landuse.shape[0]

    @property
    def width(self) -> int:
        return self.landuse.shape[1]

    @property
    def n_cells(self) -> int:
        return self.landuse.size

    def categories(self) -> np.ndarray:
        return np.unique(self.landuse)


@dataclass(frozen=True)
class CategoryProfile:
    """Floral and nesting behaviour of one land-use category.

    ``floral`` holds one entry per period: either ``("beta", a, b)`` or
    ``("point", value)``. ``nesting`` is the probability that a cell of this
    category is a nest site (binary maps for 0 and 1).
    """

    category: int
    floral: tuple
    nesting: float = 0.0
    name: str = ""

    def __post_init__(self):
        norm = []
        for spec in self.floral:
            kind = spec[0]
            if kind == "beta":
                a, b = float(spec[1]), float(spec[2])
                if not (a > 0 and b > 0):
                    raise ValueError(
                        f"category {self.category}: Beta shapes must be > 0")
                norm.append(("beta", a, b))
            elif kind == "point":
                v = float(spec[1])
                if not 0.0 <= v <= 1.0:
                    raise ValueError(
                        f"category {self.category}: point mass outside [0, 1]")
                norm.append(("point", v))
            else:
                raise ValueError(f"unknown floral law {kind!r}")
        object.__setattr__(self, "floral", tuple(norm))
        if not 0.0 <= self.nesting <= 1.0:
            raise ValueError("nesting probability must lie in [0, 1]")

    def law(self, period: int):
        if not self.floral:
            raise ConfigError(f"category {self.category} has no floral law")
        return self.floral[min(period, len(self.floral) - 1)]


@dataclass(frozen=True, eq=False)
class AttributeMap:
    """Floral (``f_j``) and nesting (``q_i``) values of one landscape for a
    given year and period. Values are frozen once drawn."""

    floral: np.ndarray
    nesting: np.ndarray
    resolution: float
    period: int = 0
    year: int = 0
    landscape: str = "landscape"

    def __post_init__(self):
        f = np.ascontiguousarray(self.floral, dtype=np.float64)
        q = np.ascontiguousarray(self.nesting, dtype=np.float64)
        if f.shape != q.shape or f.ndim != 2:
            raise ValueError("floral and nesting grids must share a 2-D shape")
        if np.any((f < 0) | (f > 1)) or np.any((q < 0) | (q > 1)):
            raise ValueError("floral and nesting values must lie in [0, 1]")
        f.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "floral", f)
        object.__setattr__(self, "nesting", q)

    @property
    def shape(self) -> tuple[int, int]:
        return self.floral.shape


@dataclass(frozen=True)
class Patch:
    id: int
    row: int
    col: int
    x: float
    y: float


def generate_attribute_maps(raster: LandscapeRaster,
                            profiles: Mapping[int, CategoryProfile] | Sequence[CategoryProfile],
                            period: int, year: int, seed) -> AttributeMap:
    """Draw floral and nesting values for every cell of ``raster``.

    Each cell's floral value is an independent draw from its category's law
    for ``period``; nesting is a Bernoulli draw with the category's nesting
    probability. The result only depends on the arguments.
    """
    profiles = _as_profile_map(profiles)
    missing = [int(c) for c in raster.categories() if int(c) not in profiles]
    if missing:
        raise ConfigError(f"no profile for category id(s) {missing}")

    rng = np.random.default_rng(seed)
    floral = np.empty(raster.landuse.shape)
    nesting = np.empty(raster.landuse.shape)
    # one uniform per cell for nesting, drawn first, keeps the floral stream
    # independent of nesting probabilities
    u_nest = rng.random(raster.landuse.shape)
    for cat in sorted(profiles):
        mask = raster.landuse == cat
        n = int(mask.sum())
        if n == 0:
            continue
        prof = profiles[cat]
        law = prof.law(period)
        if law[0] == "beta":
            floral[mask] = rng.beta(law[1], law[2], size=n)
        else:
            floral[mask] = law[1]
        nesting[mask] = (u_nest[mask] < prof.nesting).astype(np.float64)
    return AttributeMap(floral, nesting, raster.resolution, period=period,
                        year=year, landscape=raster.id)


def _as_profile_map(profiles) -> dict[int, CategoryProfile]:
    if isinstance(profiles, Mapping):
        return {int(k): v for k, v in profiles.items()}
    return {int(p.category): p for p in profiles}


def patch_index(raster: LandscapeRaster) -> list[Patch]:
    """One patch per cell, row-major, with centroids in meters."""
    res = raster.resolution
    out = []
    for r in range(raster.height):
        for c in range(raster.width):
            out.append(Patch(r * raster.width + c, r, c, (c + 0.5) * res, (r + 0.5) * res))
    return out


def patch_centroids(raster: LandscapeRaster) -> np.ndarray:
    """``(n_cells, 2)`` array of (x, y) centroids, row-major."""
    rows, cols = np.divmod(np.arange(raster.n_cells), raster.width)
    return np.column_stack([(cols + 0.5), (rows + 0.5)]) * raster.resolution


# ---------------------------------------------------------------------------
# ASCII grid files


def _read_header(lines, path):
    header = {}
    for key in ("width", "height", "resolution"):
        if not lines:
            raise FormatError(f"{path}: truncated header")
        parts = lines.pop(0).split()
        if len(parts) != 2 or parts[0] != key:
            raise FormatError(f"{path}: expected '{key} <value>' header line")
        header[key] = parts[1]
    try:
        width, height = int(header["width"]), int(header["height"])
        res = float(header["resolution"])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header value") from exc
    if width < 1 or height < 1 or not res > 0:
        raise FormatError(f"{path}: invalid grid dimensions or resolution")
    return width, height, res


def load_grid(path, dtype=float) -> tuple[np.ndarray, float]:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    width, height, res = _read_header(lines, path)
    if len(lines) != height:
        raise FormatError(f"{path}: expected {height} rows, found {len(lines)}")
    rows = []
    for i, ln in enumerate(lines):
        parts = ln.split()
        if len(parts) != width:
            raise FormatError(f"{path}: row {i} has {len(parts)} values, expected {width}")
        try:
            rows.append([dtype(p) for p in parts])
        except ValueError as exc:
            raise FormatError(f"{path}: row {i} holds a non-{dtype.__name__} value") from exc
    return np.array(rows, dtype=np.int64 if dtype is int else np.float64), res


def save_grid(path, grid: np.ndarray, resolution: float) -> None:
    grid = np.asarray(grid)
    is_int = np.issubdtype(grid.dtype, np.integer)
    fmt = str if is_int else (lambda v: repr(float(v)))
    with open(path, "w") as fh:
        fh.write(f"width {grid.shape[1]}\nheight {grid.shape[0]}\n"
                 f"resolution {float(resolution)!r}\n")
        for row in grid:
            fh.write(" ".join(fmt(v) for v in row))
            fh.write("\n")


def load_raster(path, format: str = "ascii", id: str | None = None) -> LandscapeRaster:
    if format != "ascii":
        raise FormatError(f"unsupported raster format {format!r}")
    grid, res = load_grid(path, dtype=int)
    if id is None:
        id = os.path.splitext(os.path.basename(str(path)))[0]
    return LandscapeRaster(grid, res, id=id)


def save_raster(raster: LandscapeRaster, path, format: str = "ascii") -> None:
    if format != "ascii":
        raise FormatError(f"unsupported raster format {format!r}")
    save_grid(path, raster.landuse, raster.resolution)


# ---------------------------------------------------------------------------
# synthetic inputs

URBAN, ARABLE, GRASSLAND, FOREST, LEY = 0, 1, 2, 3, 4


def default_profiles(periods: int = 3) -> dict[int, CategoryProfile]:
    """Illustrative profiles for five land-use classes over three periods.

    Arable mimics a mass-flowering crop in period 2; grassland and forest
    edges are the only nesting habitat.
    """
    table = {
        URBAN: ("urban", [("point", 0.0)] * 3, 0.0),
        ARABLE: ("arable", [("beta", 1.0, 9.0), ("beta", 8.0, 2.0), ("beta", 1.0, 9.0)], 0.0),
        GRASSLAND: ("grassland", [("beta", 3.0, 5.0), ("beta", 5.0, 3.0), ("beta", 4.0, 4.0)], 1.0),
        FOREST: ("forest", [("beta", 4.0, 6.0), ("beta", 1.0, 9.0), ("beta", 1.0, 9.0)], 1.0),
        LEY: ("ley", [("beta", 2.0, 6.0), ("beta", 4.0, 4.0), ("beta", 6.0, 3.0)], 0.0),
    }
    out = {}
    for cat, (name, laws, nest) in table.items():
        laws = (laws * ((periods + 2) // 3))[:periods]
        out[cat] = CategoryProfile(cat, tuple(laws), nest, name)
    return out


DEFAULT_WEIGHTS = {URBAN: 0.05, ARABLE: 0.4, GRASSLAND: 0.2, FOREST: 0.15, LEY: 0.2}


def synthetic_raster(width: int = 100, height: int = 100, resolution: float = 10.0,
                     n_fields: int | None = None,
                     category_weights: Mapping[int, float] | None = None,
                     seed=0, id: str = "synthetic") -> LandscapeRaster:
    """Voronoi mosaic of fields with categories drawn from ``category_weights``.

    ``n_fields`` defaults to one field per ~150 cells.
    """
    weights = dict(DEFAULT_WEIGHTS if category_weights is None else category_weights)
    cats = np.array(sorted(weights), dtype=np.int64)
    p = np.array([weights[c] for c in cats], dtype=float)
    if np.any(p < 0) or p.sum() <= 0:
        raise ConfigError("category weights must be non-negative with positive sum")
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    if n_fields is None:
        n_fields = max(1, (width * height) // 150)
    centers = rng.random((n_fields, 2)) * [width, height]
    labels = rng.choice(cats, size=n_fields, p=p)
    rows, cols = np.mgrid[0:height, 0:width]
    pts = np.column_stack([cols.ravel() + 0.5, rows.ravel() + 0.5])
    _, nearest = cKDTree(centers).query(pts)
    grid = labels[nearest].reshape(height, width)
    return LandscapeRaster(grid, resolution, id=id)
