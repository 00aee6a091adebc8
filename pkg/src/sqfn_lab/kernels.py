"""Kernels of the class C_beta, finite dictionaries of them, and the A_beta field.

A member of C_beta is supported in the closed unit ball, has mean zero and
satisfies |phi(x) - phi(x')| <= |x - x'|^beta.  The supremum over the class is
replaced by a maximum over a :class:`KernelDictionary`; the resulting field is
therefore a lower bound of the true A_beta(f)(y, t).
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .grid import Grid, GridFunction


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class KernelClassParams:
    beta: float
    holder_constant_cap: float = 1.0

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise KernelError(f"beta must lie in (0, 1], got {self.beta}")
        if self.holder_constant_cap != 1.0:
            raise KernelError("the Hoelder constant of the class is fixed to 1")


# ---------------------------------------------------------------------------
# profiles
#
# b(r) = (1 - r^2)^2 on r < 1 is the common envelope.  It is C^1, vanishes
# with its gradient on the unit sphere, max|b'| = 8 / (3 sqrt 3).

_BUMP_LIP = 8.0 / (3.0 * math.sqrt(3.0))


def _b(r2: np.ndarray) -> np.ndarray:
    return np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)


def _radial_diff(x: np.ndarray, k: float) -> np.ndarray:
    n = x.shape[-1]
    r2 = np.sum(x**2, axis=-1)
    return _b(r2) - k**n * _b(k * k * r2)


def _odd_ramp(x: np.ndarray, axis: int) -> np.ndarray:
    r = np.sqrt(np.sum(x**2, axis=-1))
    return np.where(r <= 1.0, x[:, axis] * (1.0 - r), 0.0)


def _dipole(x: np.ndarray, direction: tuple) -> np.ndarray:
    e = 0.5 * np.asarray(direction, float)
    return _b(4.0 * np.sum((x - e) ** 2, axis=-1)) - _b(4.0 * np.sum((x + e) ** 2, axis=-1))


def _poly_bump(x: np.ndarray, coeffs: tuple) -> np.ndarray:
    c = np.asarray(coeffs, float)
    r2 = np.sum(x**2, axis=-1)
    inside = r2 < 1.0
    if x.shape[-1] == 1:
        v = npoly.polyval(x[:, 0], c)
    else:
        v = npoly.polyval2d(x[:, 0], x[:, 1], c)
    return np.where(inside, v, 0.0)


def _radial_diff_bounds(k: float, n: int) -> tuple[float, float]:
    """Exact (Lipschitz constant, oscillation) of b(r) - k^n b(k r) on [0, 1]."""
    one = npoly.Polynomial([1.0, 0.0, -1.0]) ** 2
    inner = one - k**n * npoly.Polynomial([1.0, 0.0, -k * k]) ** 2
    pieces = [(inner, 0.0, 1.0 / k), (one, 1.0 / k, 1.0)]
    lip, vals = 0.0, []
    for p, lo, hi in pieces:
        d1, d2 = p.deriv(), p.deriv(2)
        cand = [lo, hi] + [r.real for r in d2.roots() if abs(r.imag) < 1e-12 and lo <= r.real <= hi]
        lip = max(lip, max(abs(d1(c)) for c in cand))
        cand = [lo, hi] + [r.real for r in d1.roots() if abs(r.imag) < 1e-12 and lo <= r.real <= hi]
        vals += [p(c) for c in cand]
    return lip, max(vals) - min(vals)


def _holder_scale(lip: float, osc: float, beta: float) -> float:
    # |phi(x) - phi(x')| <= min(lip d, osc) <= lip^beta osc^(1 - beta) d^beta
    return lip**beta * osc ** (1.0 - beta)


@dataclass(frozen=True)
class Kernel:
    """A kernel profile on the unit ball, evaluated analytically.

    ``func`` is only used for ad-hoc kernels (family ``custom``); named
    families are rebuilt from ``params``.
    """

    id: str
    family: str
    dim: int
    params: tuple = ()
    scale: float = 1.0
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, float).reshape(-1, self.dim)
        p = dict(self.params)
        if self.family == "radial_diff":
            v = _radial_diff(x, p["k"])
        elif self.family == "odd_ramp":
            v = _odd_ramp(x, p["axis"])
        elif self.family == "dipole":
            v = _dipole(x, p["direction"])
        elif self.family == "poly_bump":
            v = _poly_bump(x, p["coeffs"])
        elif self.family == "custom":
            v = np.asarray(self.func(x), float)
        else:
            raise KernelError(f"unknown kernel family {self.family!r}")
        return self.scale * v

    def scaled(self, c: float) -> "Kernel":
        return Kernel(f"{self.id}*{c!r}", self.family, self.dim, self.params, self.scale * c, self.func)

    def manifest(self) -> dict:
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params}
        if "coeffs" in params:
            params["coeffs"] = np.asarray(self.params_dict["coeffs"]).tolist()
        return {"id": self.id, "family": self.family, "dim": self.dim, "scale": self.scale, "params": params}

    @property
    def params_dict(self) -> dict:
        return dict(self.params)


def custom_kernel(func: Callable[[np.ndarray], np.ndarray], dim: int, name: str = "custom") -> Kernel:
    return Kernel(name, "custom", dim, (), 1.0, func)


def radial_diff(beta: float, dim: int, k: float = 2.0) -> Kernel:
    lip, osc = _radial_diff_bounds(k, dim)
    return Kernel(f"radial_diff[k={k:g}]", "radial_diff", dim, (("k", float(k)),), 1.0 / _holder_scale(lip, osc, beta))


def odd_ramp(beta: float, dim: int, axis: int = 0) -> Kernel:
    # x_a (1 - |x|): gradient norm <= 1 with equality at 0, range [-1/4, 1/4]
    return Kernel(f"odd_ramp[axis={axis}]", "odd_ramp", dim, (("axis", int(axis)),), 1.0 / _holder_scale(1.0, 0.5, beta))


def dipole(beta: float, dim: int, angle: float = 0.0) -> Kernel:
    direction = (1.0,) if dim == 1 else (math.cos(angle), math.sin(angle))
    # two half-size bumps of opposite sign touching at the origin
    lip, osc = 2.0 * _BUMP_LIP, 2.0
    label = "dipole" if dim == 1 else f"dipole[{math.degrees(angle):g}deg]"
    return Kernel(label, "dipole", dim, (("direction", direction),), 1.0 / _holder_scale(lip, osc, beta))


def core_members(beta: float, dim: int) -> list[Kernel]:
    if dim == 1:
        return [radial_diff(beta, 1, 2.0), odd_ramp(beta, 1), dipole(beta, 1), radial_diff(beta, 1, 4.0 / 3.0)]
    return [
        radial_diff(beta, 2, 2.0),
        odd_ramp(beta, 2, 0),
        odd_ramp(beta, 2, 1),
        dipole(beta, 2, 0.0),
        dipole(beta, 2, math.pi / 2),
        radial_diff(beta, 2, 4.0 / 3.0),
        dipole(beta, 2, math.pi / 4),
        dipole(beta, 2, 3 * math.pi / 4),
    ]


# ---------------------------------------------------------------------------
# randomized members: (P(x) - c) b(|x|) with c chosen so the integral vanishes


def _ball_monomial_integral(i: int, j: int | None = None) -> float:
    """Integral of x^i (1D) or x^i y^j (2D) over the unit ball."""
    if j is None:
        return 0.0 if i % 2 else 2.0 / (i + 1)
    if i % 2 or j % 2:
        return 0.0
    g = math.gamma
    return 2.0 * g((i + 1) / 2) * g((j + 1) / 2) / g((i + j + 2) / 2) / (i + j + 2)


def _bump_coeffs(dim: int) -> np.ndarray:
    if dim == 1:
        return np.array([1.0, 0.0, -2.0, 0.0, 1.0])
    c = np.zeros((5, 5))
    # (1 - x^2 - y^2)^2
    c[0, 0], c[2, 0], c[0, 2] = 1.0, -2.0, -2.0
    c[4, 0], c[0, 4], c[2, 2] = 1.0, 1.0, 2.0
    return c


def _integral(c: np.ndarray) -> float:
    if c.ndim == 1:
        return sum(v * _ball_monomial_integral(i) for i, v in enumerate(c))
    return sum(c[i, j] * _ball_monomial_integral(i, j) for i in range(c.shape[0]) for j in range(c.shape[1]))


def _poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim == 1:
        return npoly.polymul(a, b)
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if a[i, j]:
                out[i : i + b.shape[0], j : j + b.shape[1]] += a[i, j] * b
    return out


def _sample_bounds(c: np.ndarray, dim: int) -> tuple[float, float]:
    """Lipschitz constant and oscillation of a polynomial on the closed unit ball,
    from its analytic gradient on a dense lattice."""
    if dim == 1:
        x = np.linspace(-1.0, 1.0, 8001)
        grad = np.abs(npoly.polyval(x, npoly.polyder(c)))
        vals = npoly.polyval(x, c)
    else:
        ax = np.linspace(-1.0, 1.0, 401)
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        inside = X**2 + Y**2 <= 1.0
        X, Y = X[inside], Y[inside]
        gx = npoly.polyval2d(X, Y, npoly.polyder(c, axis=0))
        gy = npoly.polyval2d(X, Y, npoly.polyder(c, axis=1))
        grad = np.hypot(gx, gy)
        vals = npoly.polyval2d(X, Y, c)
    vals = np.append(vals, 0.0)
    return float(grad.max()), float(vals.max() - vals.min())


def random_member(beta: float, dim: int, seed: int, index: int, degree: int = 2) -> Kernel:
    rng = np.random.default_rng([seed, index])
    if dim == 1:
        p = rng.standard_normal(degree + 1)
    else:
        p = np.zeros((degree + 1, degree + 1))
        for i in range(degree + 1):
            for j in range(degree + 1 - i):
                p[i, j] = rng.standard_normal()
    bump = _bump_coeffs(dim)
    shift = _integral(_poly_mul(p, bump)) / _integral(bump)
    p = p.copy()
    p.flat[0] -= shift
    coeffs = _poly_mul(p, bump)
    lip, osc = _sample_bounds(coeffs, dim)
    # 1% margin over the sampled constants
    quotient = _holder_scale(1.01 * lip, 1.01 * osc, beta)
    scale = 1.0 / max(1.0, quotient)
    frozen = tuple(float(v) for v in coeffs.ravel()) if dim == 1 else tuple(tuple(float(v) for v in row) for row in coeffs)
    return Kernel(f"poly_bump[{seed}:{index}]", "poly_bump", dim, (("coeffs", frozen),), scale)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Tolerances:
    eps_mean: float = 1e-8
    eps_hold: float = 1e-8
    lattice: int = 64
    random_pairs: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class ValidationReport:
    support_ok: bool
    mean_ok: bool
    holder_ok: bool
    mean_value: float
    holder_quotient: float
    l2_mass: float

    @property
    def passed(self) -> bool:
        return self.support_ok and self.mean_ok and self.holder_ok


def _gauss_panels(a: float, b: float, panels: int, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    mid, half = (edges[:-1] + edges[1:]) / 2, (edges[1:] - edges[:-1]) / 2
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


@lru_cache(maxsize=None)
def ball_quadrature(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Point-symmetric rule on the unit ball, exact for functions that are
    polynomial in r (times trig polynomials in theta for n = 2) between
    multiples of 1/64 in r."""
    if dim == 1:
        x, w = _gauss_panels(0.0, 1.0, 64)
        pts = np.concatenate([x, -x])[:, None]
        return pts, np.concatenate([w, w])
    r, wr = _gauss_panels(0.0, 1.0, 64)
    nt = 256
    th = (np.arange(nt) + 0.5) * math.pi / nt
    R, T = np.meshgrid(r, th, indexing="ij")
    W = (wr * r)[:, None] * np.full(nt, math.pi / nt)[None, :]
    half = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=-1)
    return np.concatenate([half, -half]), np.concatenate([W.ravel(), W.ravel()])


def validate_kernel(k: Kernel, params: KernelClassParams, tol: Tolerances = Tolerances()) -> ValidationReport:
    """Check support, mean zero and the Hoelder-beta bound.  Failures are report
    entries, not exceptions."""
    n, beta = k.dim, params.beta
    # support: zero outside, zero on the sphere, Hoelder decay towards it
    side = 1.25
    ax = -side + (np.arange(tol.lattice) + 0.5) * (2 * side / tol.lattice)
    lat = np.stack([g.ravel() for g in np.meshgrid(*([ax] * n), indexing="ij")], axis=-1)
    vals = k(lat)
    outside = np.sum(lat**2, axis=-1) > 1.0
    if n == 1:
        sphere = np.array([[1.0], [-1.0]])
    else:
        th = np.linspace(0.0, 2 * math.pi, 361)[:-1]
        sphere = np.stack([np.cos(th), np.sin(th)], axis=-1)
    support_ok = bool(np.all(vals[outside] == 0.0))
    support_ok &= bool(np.all(np.abs(k(sphere)) <= tol.eps_hold))
    for delta in (1e-2, 1e-4, 1e-6):
        near = np.abs(k((1.0 - delta) * sphere))
        support_ok &= bool(np.all(near <= delta**beta * (1.0 + tol.eps_hold) + tol.eps_hold))

    qp, qw = ball_quadrature(n)
    qv = k(qp)
    mean = float(np.sum(qv * qw))
    l2 = float(np.sqrt(np.sum(qv**2 * qw)))

    # Hoelder quotient: all lattice pairs plus random close pairs
    worst = 0.0
    inner = lat[np.sum(lat**2, axis=-1) <= 1.2**2]
    iv = k(inner)
    for s in range(0, inner.shape[0], 512):
        d = np.sqrt(np.sum((inner[s : s + 512, None, :] - inner[None, :, :]) ** 2, axis=-1))
        dv = np.abs(iv[s : s + 512, None] - iv[None, :])
        ok = d > 0
        if ok.any():
            worst = max(worst, float(np.max(dv[ok] / d[ok] ** beta)))
    rng = np.random.default_rng(tol.seed)
    m = tol.random_pairs
    x = rng.uniform(-1.1, 1.1, size=(m, n))
    u = rng.standard_normal((m, n))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    step = 10.0 ** rng.uniform(-5, 0, size=(m, 1))
    x2 = x + step * u
    d = np.linalg.norm(x - x2, axis=-1)
    worst = max(worst, float(np.max(np.abs(k(x) - k(x2)) / d**beta)))
    return ValidationReport(
        support_ok=support_ok,
        mean_ok=abs(mean) <= tol.eps_mean,
        holder_ok=worst <= 1.0 + tol.eps_hold,
        mean_value=mean,
        holder_quotient=worst,
        l2_mass=l2,
    )


# ---------------------------------------------------------------------------
# dictionaries


@dataclass(frozen=True)
class KernelDictionary:
    params: KernelClassParams
    members: tuple[Kernel, ...]
    seed: int
    dim: int
    reports: tuple[ValidationReport, ...] = field(default=(), compare=False, repr=False)

    @property
    def size(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def subset(self, size: int) -> "KernelDictionary":
        return KernelDictionary(self.params, self.members[:size], self.seed, self.dim, self.reports[:size])

    def manifest(self) -> dict:
        rows = []
        for k, rep in zip(self.members, self.reports):
            row = k.manifest()
            row["validation"] = {
                "support_ok": rep.support_ok,
                "mean_ok": rep.mean_ok,
                "holder_ok": rep.holder_ok,
                "mean": rep.mean_value,
                "holder_quotient": rep.holder_quotient,
                "l2_mass": rep.l2_mass,
            }
            rows.append(row)
        return {"beta": self.params.beta, "dim": self.dim, "seed": self.seed, "size": self.size, "members": rows}

    def write_manifest(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


def build_dictionary(params: KernelClassParams, size: int, seed: int, dim: int = 1) -> KernelDictionary:
    """Deterministic core members first, then seeded random members.

    Member ``i`` depends only on (beta, dim, seed, i), so dictionaries built
    with the same seed are nested.
    """
    if size < 1:
        raise KernelError(f"dictionary size must be >= 1, got {size}")
    core = core_members(params.beta, dim)
    members = core[:size]
    for i in range(len(members), size):
        members.append(random_member(params.beta, dim, seed, i))
    reports = []
    for i, k in enumerate(members):
        tol = Tolerances(eps_mean=1e-8 if i < len(core) else 1e-6)
        rep = validate_kernel(k, params, tol)
        if not rep.passed:
            raise KernelError(f"dictionary member {k.id} failed validation: {rep}")
        reports.append(rep)
    if max(r.l2_mass for r in reports) < 0.1:
        raise KernelError("degenerate dictionary: no member has L2 mass >= 0.1")
    return KernelDictionary(params, tuple(members), seed, dim, tuple(reports))


# ---------------------------------------------------------------------------
# convolution and the A field


def dilate_convolve(f: GridFunction, k: Kernel, t: float, y, strict: bool = True) -> float:
    """Midpoint sum of phi_t(y - z) f(z) h^n with phi_t(x) = t^-n phi(x / t)."""
    if not t > 0:
        raise KernelError(f"t must be positive, got {t}")
    g = f.grid
    y = np.broadcast_to(np.asarray(y, float), (g.dim,))
    if strict and np.max(np.abs(y)) + t > g.halfwidth + 1e-12:
        raise KernelError(f"B(y={y.tolist()}, t={t}) is not contained in the grid domain (domain truncation)")
    phi = k((y - g.points) / t) / t**g.dim
    return float(np.sum(phi * f.values) * g.cell_volume)


@dataclass(frozen=True)
class Lattice:
    """(y, t) lattice: y on every ``stride``-th cell centre per axis, t geometric."""

    grid: Grid
    stride: int
    t_min: float
    ratio: float
    count: int

    def __post_init__(self):
        if self.stride < 1 or self.grid.points_per_axis % self.stride:
            raise KernelError(f"stride {self.stride} must divide m = {self.grid.points_per_axis}")
        if self.count < 1:
            raise KernelError("empty t ladder")
        if not self.ratio > 1:
            raise KernelError(f"ladder ratio must exceed 1, got {self.ratio}")
        if not (self.t_min > 0 and self.ts[-1] <= self.grid.halfwidth * (1 + 1e-12)):
            raise KernelError(f"t ladder [{self.t_min}, {self.ts[-1]}] must lie in (0, L]")

    @property
    def ts(self) -> np.ndarray:
        return self.t_min * self.ratio ** np.arange(self.count)

    @property
    def dlog(self) -> float:
        return math.log(self.ratio)

    @property
    def y_axis_index(self) -> np.ndarray:
        return np.arange((self.stride - 1) // 2, self.grid.points_per_axis, self.stride)

    @property
    def y_index(self) -> np.ndarray:
        ax = self.y_axis_index
        return np.stack([g.ravel() for g in np.meshgrid(*([ax] * self.grid.dim), indexing="ij")], axis=-1)

    @property
    def y_points(self) -> np.ndarray:
        return -self.grid.halfwidth + (self.y_index + 0.5) * self.grid.h

    @property
    def y_flat(self) -> np.ndarray:
        """Flat grid index of each lattice y."""
        idx = self.y_index
        m = self.grid.points_per_axis
        flat = np.zeros(idx.shape[0], dtype=int)
        for d in range(self.grid.dim):
            flat = flat * m + idx[:, d]
        return flat

    @property
    def y_cell_volume(self) -> float:
        return (self.stride * self.grid.h) ** self.grid.dim

    def spec(self) -> dict:
        return {"stride": self.stride, "t_min": self.t_min, "ratio": self.ratio, "count": self.count}


def default_lattice(grid: Grid, stride: int = 1, ratio: float = 2.0**0.25, t_min=None, t_max=None) -> Lattice:
    """t_min = 2h, t_max = L/2, ratio 2^(1/4) unless overridden."""
    t_min = 2.0 * grid.h if t_min is None else float(t_min)
    t_max = grid.halfwidth / 2.0 if t_max is None else float(t_max)
    count = int(math.floor(math.log(t_max / t_min) / math.log(ratio) + 1e-9)) + 1
    return Lattice(grid, stride, t_min, ratio, count)


@dataclass(frozen=True, eq=False)
class AField:
    """A(y, t) for a batch of functions: ``values`` has shape (F, Y, T)."""

    lattice: Lattice
    values: np.ndarray
    ids: tuple[str, ...] = ()
    members: np.ndarray | None = field(default=None, repr=False)  # (F, K, Y, T) when kept

    @property
    def truncated(self) -> np.ndarray:
        """(Y, T) mask of lattice nodes whose ball B(y, t) leaves the domain."""
        lat = self.lattice
        reach = np.max(np.abs(lat.y_points), axis=-1)[:, None] + lat.ts[None, :]
        return reach > lat.grid.halfwidth * (1 + 1e-12)

    def mass(self) -> np.ndarray:
        """Per-node share of the dy dt / t^(n+1) integral: A^2 h_y^n dlog / t^n, shape (F, Y, T)."""
        lat = self.lattice
        w = lat.y_cell_volume * lat.dlog / lat.ts**lat.grid.dim
        return self.values**2 * w[None, None, :]

    def truncated_fraction(self) -> np.ndarray:
        m = self.mass()
        tot = m.sum(axis=(1, 2))
        trunc = (m * self.truncated[None]).sum(axis=(1, 2))
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(tot > 0, trunc / tot, 0.0)

    def single(self, i: int) -> "AField":
        mem = None if self.members is None else self.members[i : i + 1]
        return AField(self.lattice, self.values[i : i + 1], self.ids[i : i + 1], mem)

    def member(self, k: int) -> "AField":
        """Field of the k-th dictionary member alone (requires ``keep_members``)."""
        if self.members is None:
            raise KernelError("per-member values were not kept")
        return AField(self.lattice, self.members[:, k], self.ids)


def _offset_table(lattice: Lattice) -> np.ndarray:
    """Integer offsets (y index - z index), shape (Y, Z, n)."""
    return lattice.y_index[:, None, :] - lattice.grid.index[None, :, :]


def _threads() -> int:
    return max(1, int(os.environ.get("SQFN_LAB_THREADS", "1")))


def a_beta_field(
    fs: GridFunction | Sequence[GridFunction],
    dictionary: KernelDictionary | Sequence[Kernel],
    lattice: Lattice,
    threads: int | None = None,
    keep_members: bool = False,
) -> AField:
    """A(y, t) = max over the dictionary of |f * phi_t(y)| on the lattice.

    Accepts one function or a batch on a common grid; the batch shares every
    convolution matrix.
    """
    single = isinstance(fs, GridFunction)
    fs = [fs] if single else list(fs)
    members = list(dictionary)
    if not members:
        raise KernelError("empty dictionary")
    if not fs:
        raise KernelError("no functions given")
    grid = lattice.grid
    for f in fs:
        if f.grid != grid:
            raise KernelError("function grid differs from lattice grid")
    F = np.stack([f.values for f in fs], axis=1)  # (Z, F)
    offsets = _offset_table(lattice)
    h, n = grid.h, grid.dim
    ts = lattice.ts

    def column(t: float) -> np.ndarray:
        D = int(math.ceil(t / h))
        inside = np.all(np.abs(offsets) <= D, axis=-1)
        box_ax = np.arange(-D, D + 1)
        box = np.stack([g.ravel() for g in np.meshgrid(*([box_ax] * n), indexing="ij")], axis=-1)
        flat = np.zeros(offsets.shape[:2], dtype=int)
        for d in range(n):
            flat = flat * (2 * D + 1) + np.clip(offsets[..., d] + D, 0, 2 * D)
        best = np.zeros((offsets.shape[0], F.shape[1]))
        per = []
        for k in members:
            kv = k(box * (h / t)) * (h**n / t**n)
            mat = np.where(inside, kv[flat], 0.0)
            a = np.abs(mat @ F)
            np.maximum(best, a, out=best)
            if keep_members:
                per.append(a)
        return best, per

    nthreads = threads or _threads()
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            cols = list(ex.map(column, ts))
    else:
        cols = [column(t) for t in ts]
    vals = np.stack([c[0] for c in cols], axis=-1)  # (Y, F, T)
    mem = None
    if keep_members:
        mem = np.stack([np.stack(c[1], axis=0) for c in cols], axis=-1)  # (K, Y, F, T)
        mem = np.ascontiguousarray(mem.transpose(2, 0, 1, 3))
    return AField(lattice, np.ascontiguousarray(vals.transpose(1, 0, 2)), tuple(f.id for f in fs), mem)
