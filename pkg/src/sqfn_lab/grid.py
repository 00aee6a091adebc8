"""Uniform cell-centred grids on [-L, L]^n and the functions sampled on them.

All integrals are midpoint (cell-centre) sums.  ``m`` is always even so the
origin is never a node, which keeps power weights |x|^a with a < 0 finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    dim: int
    halfwidth: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if not self.halfwidth > 0:
            raise GridError(f"halfwidth must be positive, got {self.halfwidth}")
        m = self.points_per_axis
        if m < 8:
            raise GridError(f"points_per_axis must be >= 8, got {m}")
        if m % 2:
            raise GridError(f"points_per_axis must be even (odd m puts a node at the origin), got {m}")

    @property
    def m(self) -> int:
        return self.points_per_axis

    @property
    def h(self) -> float:
        return 2.0 * self.halfwidth / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        i = np.arange(self.points_per_axis)
        return -self.halfwidth + (i + 0.5) * self.h

    @cached_property
    def points(self) -> np.ndarray:
        """Cell centres, shape (m**n, n), row-major (last axis fastest)."""
        axes = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        pts = np.stack([a.ravel() for a in axes], axis=-1)
        pts.flags.writeable = False
        return pts

    @cached_property
    def radii(self) -> np.ndarray:
        r = np.sqrt(np.sum(self.points**2, axis=-1))
        r.flags.writeable = False
        return r

    @cached_property
    def index(self) -> np.ndarray:
        """Integer cell indices, shape (m**n, n)."""
        axes = np.meshgrid(*([np.arange(self.points_per_axis)] * self.dim), indexing="ij")
        idx = np.stack([a.ravel() for a in axes], axis=-1)
        idx.flags.writeable = False
        return idx

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.halfwidth, self.points_per_axis * factor)

    def spec(self) -> dict:
        return {"dim": self.dim, "halfwidth": self.halfwidth, "m": self.points_per_axis}


def make_grid(dim: int, halfwidth: float, points_per_axis: int) -> Grid:
    return Grid(int(dim), float(halfwidth), int(points_per_axis))


# ---------------------------------------------------------------------------
# analytic fields


@dataclass(frozen=True)
class Field:
    """An analytic scalar field: ``func`` maps an (N, n) point array to (N,) values.

    ``name`` and ``params`` identify the formula; they are what gets recorded
    as provenance and what :func:`field_from_spec` rebuilds from.
    """

    name: str
    params: tuple = ()
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.func is None:
            return FORMULAS[self.name](**dict(self.params))(x)
        return self.func(x)

    @property
    def id(self) -> str:
        if not self.params:
            return self.name
        body = ",".join(f"{k}={_fmt(v)}" for k, v in self.params)
        return f"{self.name}({body})"

    def provenance(self) -> dict:
        return {"formula": self.name, "params": {k: v for k, v in self.params}}


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return "[" + ",".join(_fmt(u) for u in v) + "]"
    return repr(v) if isinstance(v, float) else str(v)


def _center(x: np.ndarray, center) -> np.ndarray:
    c = np.zeros(x.shape[-1]) if center is None else np.broadcast_to(np.asarray(center, float), (x.shape[-1],))
    return x - c


def _zero():
    return lambda x: np.zeros(x.shape[0])


def _constant(c=1.0):
    return lambda x: np.full(x.shape[0], float(c))


def _annulus_indicator(inner=1.0, outer=2.0, amp=1.0):
    def f(x):
        r = np.sqrt(np.sum(x**2, axis=-1))
        return amp * ((r > inner) & (r <= outer)).astype(float)

    return f


def _ball_indicator(radius=1.0, center=None, amp=1.0):
    def f(x):
        r = np.sqrt(np.sum(_center(x, center) ** 2, axis=-1))
        return amp * (r <= radius).astype(float)

    return f


def _gaussian(center=None, scale=1.0, amp=1.0):
    def f(x):
        d2 = np.sum(_center(x, center) ** 2, axis=-1)
        return amp * np.exp(-d2 / scale**2)

    return f


def _bump(center=None, radius=1.0, amp=1.0):
    # (1 - |x|^2)^2 on the unit ball, dilated and shifted
    def f(x):
        r2 = np.sum(_center(x, center) ** 2, axis=-1) / radius**2
        return amp * np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)

    return f


def _power(a=0.0, amp=1.0, cutoff=None, inner=0.0):
    def f(x):
        r = np.sqrt(np.sum(x**2, axis=-1))
        keep = r > inner
        if cutoff is not None:
            keep &= r <= cutoff
        return np.where(keep, amp * np.where(keep, r, 1.0) ** a, 0.0)

    return f


def _dyadic_steps(cell=0.25, radius=2.0, values=()):
    """Piecewise constant on the cubes of side ``cell`` tiling [-radius, radius]^n.

    ``values`` lists one value per cube in row-major order.
    """
    vals = np.asarray(values, float)

    def f(x):
        n = x.shape[-1]
        per_axis = int(round(2 * radius / cell))
        idx = np.floor((x + radius) / cell).astype(int)
        inside = np.all((idx >= 0) & (idx < per_axis), axis=-1)
        flat = np.zeros(x.shape[0], dtype=int)
        for d in range(n):
            flat = flat * per_axis + np.clip(idx[:, d], 0, per_axis - 1)
        out = np.zeros(x.shape[0])
        out[inside] = vals[flat[inside]]
        return out

    return f


def _plateaus(levels=(1.0,), radii=(1.0,)):
    """Radial step function: ``levels[i]`` on radii[i-1] < |x| <= radii[i]."""

    def f(x):
        r = np.sqrt(np.sum(x**2, axis=-1))
        out = np.zeros(x.shape[0])
        lo = 0.0
        for lev, hi in zip(levels, radii):
            out[(r > lo) & (r <= hi)] = lev
            lo = hi
        return out

    return f


FORMULAS: dict[str, Callable[..., Callable[[np.ndarray], np.ndarray]]] = {
    "zero": _zero,
    "constant": _constant,
    "annulus": _annulus_indicator,
    "ball": _ball_indicator,
    "gaussian": _gaussian,
    "bump": _bump,
    "power": _power,
    "dyadic_steps": _dyadic_steps,
    "plateaus": _plateaus,
}


def _freeze(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return tuple(_freeze(u) for u in v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def field_from_spec(name: str, **params) -> Field:
    if name not in FORMULAS:
        raise KeyError(f"unknown formula {name!r}; known: {sorted(FORMULAS)}")
    frozen = tuple(sorted((k, _freeze(v)) for k, v in params.items()))
    return Field(name, frozen, FORMULAS[name](**params))


# ---------------------------------------------------------------------------
# grid functions


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray
    metadata: Mapping[str, Any] = field(default_factory=dict)
    source: Field | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise GridError(f"value array has {v.size} entries, grid has {self.grid.size} cells")
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            i = int(bad[0])
            raise GridError(f"non-finite value {v[i]} at node {i} (x={self.grid.points[i].tolist()})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def id(self) -> str:
        return str(self.metadata.get("id", "anonymous"))

    def with_values(self, values: np.ndarray, **metadata) -> "GridFunction":
        return GridFunction(self.grid, values, {**self.metadata, **metadata})

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, c * self.values, {**self.metadata, "scaled": float(c)})

    __rmul__ = __mul__

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if other.grid != self.grid:
            raise GridError("cannot add functions on different grids")
        return GridFunction(self.grid, self.values + other.values, {"id": f"{self.id}+{other.id}"})

    def resample(self, grid: Grid) -> "GridFunction":
        if self.source is None:
            raise GridError(f"{self.id} has no analytic source; cannot resample")
        return sample(self.source, grid)


def sample(formula: Field | Callable[[np.ndarray], np.ndarray], grid: Grid) -> GridFunction:
    values = np.asarray(formula(grid.points), dtype=float).reshape(-1)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise GridError(f"formula is not finite at node {i} (x={grid.points[i].tolist()}): {values[i]}")
    if isinstance(formula, Field):
        meta = {"id": formula.id, **formula.provenance()}
        return GridFunction(grid, values, meta, source=formula)
    return GridFunction(grid, values, {"id": getattr(formula, "__name__", "callable")})


def _weight_values(w, grid: Grid) -> np.ndarray | float:
    if w is None:
        return 1.0
    vals = np.asarray(w.values_on(grid), float)
    return vals


def lq_norm_weighted(f: GridFunction, q: float, w=None, mask: np.ndarray | None = None) -> float:
    """(sum_i |f_i|^q w(x_i) h^n)^(1/q); ``w=None`` is Lebesgue measure."""
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")
    a = np.abs(f.values) ** q * _weight_values(w, f.grid)
    if mask is not None:
        a = a[mask]
    return float(np.sum(a) * f.grid.cell_volume) ** (1.0 / q)


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Ball:
    """Closed ball |x - center| <= radius."""

    center: tuple = (0.0,)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    def mask(self, grid: Grid) -> np.ndarray:
        c = np.broadcast_to(np.asarray(self.center, float), (grid.dim,))
        d = np.sqrt(np.sum((grid.points - c) ** 2, axis=-1))
        return d <= self.radius

    def lebesgue(self, n: int) -> float:
        return unit_ball_volume(n) * self.radius**n


@dataclass(frozen=True)
class Annulus:
    """Origin-centred shell inner < |x| <= outer."""

    inner: float
    outer: float

    def __post_init__(self):
        if not (self.inner > 0 and self.outer > 0):
            raise ValueError("annulus radii must be positive")
        if not self.inner < self.outer:
            raise ValueError(f"annulus needs inner < outer, got {self.inner} >= {self.outer}")

    def mask(self, grid: Grid) -> np.ndarray:
        r = grid.radii
        return (r > self.inner) & (r <= self.outer)


@dataclass(frozen=True)
class WholeDomain:
    def mask(self, grid: Grid) -> np.ndarray:
        return np.ones(grid.size, dtype=bool)


RegionSpec = Ball | Annulus | WholeDomain


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def region_measure(region: RegionSpec, grid: Grid, w=None) -> float:
    wv = _weight_values(w, grid)
    m = region.mask(grid)
    wv = np.broadcast_to(wv, (grid.size,))
    return float(np.sum(wv[m]) * grid.cell_volume)


def distribution_set_measure(f: GridFunction, level: float, region: RegionSpec = WholeDomain(), w=None) -> float:
    """w-measure of {x in region : |f(x)| > level}."""
    if not level > 0:
        raise ValueError(f"level must be positive, got {level}")
    m = region.mask(f.grid) & (np.abs(f.values) > level)
    wv = np.broadcast_to(_weight_values(w, f.grid), (f.grid.size,))
    return float(np.sum(wv[m]) * f.grid.cell_volume)


def support_radius(f: GridFunction, threshold: float = 0.0) -> float:
    big = np.abs(f.values) > threshold
    if not big.any():
        return 0.0
    return float(f.grid.radii[big].max())


# ---------------------------------------------------------------------------
# CSV


def write_csv(f: GridFunction, path: str | Path) -> None:
    g = f.grid
    lines = [f"{g.dim},{g.halfwidth!r},{g.points_per_axis}"]
    lines += [repr(float(v)) for v in f.values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> GridFunction:
    text = Path(path).read_text().split()
    try:
        dim, halfwidth, m = text[0].split(",")
        grid = Grid(int(dim), float(halfwidth), int(m))
    except (ValueError, IndexError) as exc:
        raise GridError(f"{path}: bad header line {text[:1]!r}, expected 'dim,halfwidth,m'") from exc
    values = np.array([float(v) for v in text[1:]])
    return GridFunction(grid, values, {"id": Path(path).stem, "file": str(path)})
