"""Cone and half-space quadrature turning an A field into square functions.

The measure dy dt / t^(n+1) is discretised per lattice node as
h_y^n * log(rho) / t^n (log-uniform t ladder), and cone membership is the
strict test |x - y| < gamma t on cell centres.  All batch routines work on
an :class:`~sqfn_lab.kernels.AField` holding F functions and return arrays of
shape (F, X) over every grid cell x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import GridFunction, unit_ball_volume
from .kernels import AField, Kernel, KernelDictionary, KernelError, Lattice, a_beta_field, default_lattice


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class ConeQuadratureSpec:
    """t ladder and y sub-sampling; the aperture is passed separately."""

    lattice: Lattice

    @classmethod
    def default(cls, grid, stride: int = 1, **kw) -> "ConeQuadratureSpec":
        return cls(default_lattice(grid, stride, **kw))

    @property
    def grid(self):
        return self.lattice.grid


@dataclass(frozen=True)
class GStarParams:
    lam: float

    def __post_init__(self):
        if not self.lam > 1:
            raise QuadratureError(f"lambda must exceed 1, got {self.lam}")

    def theorem_admissible(self, q2: float) -> bool:
        return self.lam > max(q2, 3.0)


def _distances(lattice: Lattice) -> np.ndarray:
    g = lattice.grid
    diff = g.points[:, None, :] - lattice.y_points[None, :, :]
    return np.sqrt(np.sum(diff**2, axis=-1))


def cone_square_sum(
    afield: AField,
    selector: Callable[[np.ndarray, float], np.ndarray],
    measure: np.ndarray,
) -> np.ndarray:
    """sum_t sum_y selector(dist, t)[x, y] * A(y, t)^2 * measure[t], shape (F, X).

    ``selector`` receives the (X, Y) distance matrix and t and returns a
    nonnegative (X, Y) weight matrix; every square function below is this
    sum with a particular selector and measure.
    """
    lat = afield.lattice
    dist = _distances(lat)
    sq = afield.values**2  # (F, Y, T)
    out = np.zeros((sq.shape[0], dist.shape[0]))
    for k, t in enumerate(lat.ts):
        wmat = selector(dist, float(t))
        out += (wmat @ (sq[:, :, k] * measure[k]).T).T
    return out


def cone_measure(lat: Lattice) -> np.ndarray:
    return lat.y_cell_volume * lat.dlog / lat.ts**lat.grid.dim


def cone_selector(gamma: float):
    def sel(dist, t):
        return (dist < gamma * t).astype(float)

    return sel


def identity_selector(lat: Lattice):
    if lat.stride != 1:
        raise QuadratureError("the zero-aperture function needs y on every grid cell (stride 1)")
    eye = np.eye(lat.grid.size)

    def sel(dist, t):
        return eye

    return sel


def gstar_selector(lam: float, n: int):
    def sel(dist, t):
        # exp(lam n log(...)) keeps the weight monotone in lam
        return np.exp(lam * n * np.log(t / (t + dist)))

    return sel


# ---------------------------------------------------------------------------
# batch forms


def s_beta_batch(afield: AField, gamma: float = 1.0) -> np.ndarray:
    if not gamma > 0:
        raise QuadratureError(f"aperture must be positive, got {gamma}")
    lat = afield.lattice
    return np.sqrt(cone_square_sum(afield, cone_selector(gamma), cone_measure(lat)))


def g_beta_batch(afield: AField) -> np.ndarray:
    lat = afield.lattice
    return np.sqrt(cone_square_sum(afield, identity_selector(lat), np.full(lat.count, lat.dlog)))


def g_star_batch(afield: AField, lam: float) -> np.ndarray:
    GStarParams(lam)
    lat = afield.lattice
    return np.sqrt(cone_square_sum(afield, gstar_selector(lam, lat.grid.dim), cone_measure(lat)))


def total_lattice_mass(afield: AField) -> np.ndarray:
    """sum over every lattice node of A^2 * measure, shape (F,); bounds any cone sum."""
    lat = afield.lattice
    return np.einsum("fyt,t->f", afield.values**2, cone_measure(lat))


def aperture_ladder_batch(afield: AField, j_max: int) -> list[np.ndarray]:
    lat = afield.lattice
    if j_max < 0:
        raise QuadratureError("j_max must be >= 0")
    diameter = 2 * lat.grid.halfwidth * math.sqrt(lat.grid.dim)
    if 2.0**j_max * lat.t_min >= diameter:
        raise QuadratureError(f"aperture 2^{j_max} makes every cone exceed the domain")
    return [s_beta_batch(afield, 2.0**j) for j in range(j_max + 1)]


def gstar_exterior_tail(afield: AField, f_sup: np.ndarray, lam: float) -> np.ndarray:
    """Upper bound on the part of G*^2 coming from y outside the domain, shape (F, X).

    Uses |f * phi_t| <= ||f||_inf v_n, a kernel weight at most
    (t / (t + d_x))^(lam n) with d_x the distance from x to the boundary, and
    the volume of the shell of width t around the cube.
    """
    lat = afield.lattice
    g = lat.grid
    n, L = g.dim, g.halfwidth
    dx = L - np.max(np.abs(g.points), axis=-1)
    tail = np.zeros(g.size)
    for t in lat.ts:
        shell = (2 * L + 2 * t) ** n - (2 * L) ** n
        tail += (t / (t + dx)) ** (lam * n) * shell * lat.dlog / t**n
    vn = unit_ball_volume(n)
    return (np.asarray(f_sup)[:, None] * vn) ** 2 * tail[None, :]


def far_field_constant(n: int) -> float:
    """c(n) 4^n with c(n) = sqrt(v_n / (2n)): S(f)(x) <= this * |x|^-n * ||f||_1
    whenever |x| >= 2 * support radius of f."""
    return math.sqrt(unit_ball_volume(n) / (2 * n)) * 4.0**n


# ---------------------------------------------------------------------------
# single-function forms returning GridFunctions


def _field(f: GridFunction, dictionary, quad: ConeQuadratureSpec) -> AField:
    if f.grid != quad.grid:
        raise QuadratureError("function and quadrature live on different grids")
    return a_beta_field(f, dictionary, quad.lattice)


def _wrap(f: GridFunction, values: np.ndarray, name: str, afield: AField, **extra) -> GridFunction:
    meta = {
        "id": f"{name}[{f.id}]",
        "operator": name,
        "input": f.id,
        "truncated_fraction": float(afield.truncated_fraction()[0]),
        **extra,
    }
    return GridFunction(f.grid, values, meta)


def s_beta(f: GridFunction, dictionary: KernelDictionary, gamma: float, quad: ConeQuadratureSpec) -> GridFunction:
    if not gamma > 0:
        raise QuadratureError(f"aperture must be positive, got {gamma}")
    af = _field(f, dictionary, quad)
    return _wrap(f, s_beta_batch(af, gamma)[0], f"S_beta,{gamma:g}", af, gamma=gamma)


def g_beta(f: GridFunction, dictionary: KernelDictionary, quad: ConeQuadratureSpec) -> GridFunction:
    af = _field(f, dictionary, quad)
    return _wrap(f, g_beta_batch(af)[0], "G_beta", af)


def g_star(f: GridFunction, dictionary: KernelDictionary, lam: GStarParams | float, quad: ConeQuadratureSpec) -> GridFunction:
    lam = lam.lam if isinstance(lam, GStarParams) else GStarParams(lam).lam
    af = _field(f, dictionary, quad)
    tail = gstar_exterior_tail(af, np.array([np.max(np.abs(f.values))]), lam)[0]
    return _wrap(f, g_star_batch(af, lam)[0], f"G*_{lam:g}", af, lam=lam, exterior_tail_max=float(tail.max()))


def s_psi(f: GridFunction, psi: Kernel, gamma: float, quad: ConeQuadratureSpec) -> GridFunction:
    if not gamma > 0:
        raise QuadratureError(f"aperture must be positive, got {gamma}")
    af = _field(f, [psi], quad)
    return _wrap(f, s_beta_batch(af, gamma)[0], f"S_psi[{psi.id}],{gamma:g}", af, gamma=gamma)


def s_beta_aperture_ladder(
    f: GridFunction, dictionary: KernelDictionary, j_max: int, quad: ConeQuadratureSpec
) -> list[GridFunction]:
    af = _field(f, dictionary, quad)
    return [
        _wrap(f, v[0], f"S_beta,{2**j}", af, gamma=float(2**j))
        for j, v in enumerate(aperture_ladder_batch(af, j_max))
    ]


__all__ = [
    "ConeQuadratureSpec",
    "GStarParams",
    "KernelError",
    "QuadratureError",
    "aperture_ladder_batch",
    "cone_square_sum",
    "far_field_constant",
    "g_beta",
    "g_beta_batch",
    "g_star",
    "g_star_batch",
    "gstar_exterior_tail",
    "s_beta",
    "s_beta_aperture_ladder",
    "s_beta_batch",
    "s_psi",
    "total_lattice_mass",
]
