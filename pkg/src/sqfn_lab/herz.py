"""Weighted Herz, weak Herz and weak Lebesgue norms over a finite annuli window.

Cells are assigned to C_k = {2^(k-1) < |x| <= 2^k} by their centres, so every
cell belongs to exactly one annulus and annulus sums repartition the same
cell sum used by :func:`~sqfn_lab.grid.lq_norm_weighted`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, GridFunction
from .weights import (
    Weight,
    WeightError,
    ap_characteristic,
    ball_measure,
    build_ball_family,
    constant,
    power_weight_in_ap,
)


class HerzError(ValueError):
    pass


@dataclass(frozen=True)
class Annuli:
    grid: Grid
    k_min: int
    k_max: int

    def __post_init__(self):
        if self.k_min > self.k_max:
            raise HerzError(f"empty annuli window [{self.k_min}, {self.k_max}]")
        if 2.0**self.k_max > self.grid.halfwidth * (1 + 1e-12):
            raise HerzError(f"B_{self.k_max} = B(0, {2.0**self.k_max}) leaves the domain [-{self.grid.halfwidth}, {self.grid.halfwidth}]^n")
        if 2.0**self.k_min < 2 * self.grid.h * (1 - 1e-12):
            raise HerzError(f"annulus C_{self.k_min} is thinner than two cells (h = {self.grid.h})")

    @classmethod
    def default(cls, grid: Grid) -> "Annuli":
        return cls(grid, math.ceil(math.log2(4 * grid.h) - 1e-12), math.floor(math.log2(grid.halfwidth) + 1e-12))

    @property
    def ks(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def shell_index(self) -> np.ndarray:
        """Annulus index k of every cell (C_k contains the cell centre)."""
        r = self.grid.radii
        return np.ceil(np.log2(r) - 1e-15).astype(int)

    def mask(self, k: int) -> np.ndarray:
        r = self.grid.radii
        return (r > 2.0 ** (k - 1)) & (r <= 2.0**k)

    def spec(self) -> dict:
        return {"k_min": self.k_min, "k_max": self.k_max}


@dataclass(frozen=True)
class HerzParams:
    alpha: float
    p: float
    q: float
    w1: Weight = field(default_factory=constant)
    w2: Weight = field(default_factory=constant)
    q1: float = 1.0
    q2: float = 1.0
    homogeneous: bool = True

    def __post_init__(self):
        if not self.p > 0:
            raise HerzError(f"p must be positive, got {self.p}")
        if not self.q > 1:
            raise HerzError(f"q must exceed 1, got {self.q}")
        if self.q1 < 1 or self.q2 < 1:
            raise HerzError(f"q1, q2 must be >= 1, got {self.q1}, {self.q2}")

    def spec(self) -> dict:
        return {
            "alpha": self.alpha,
            "p": self.p,
            "q": self.q,
            "q1": self.q1,
            "q2": self.q2,
            "w1": self.w1.spec(),
            "w2": self.w2.spec(),
            "homogeneous": self.homogeneous,
        }


def declared_membership_ok(w: Weight, q: float, n: int, grid: Grid | None = None) -> bool:
    """Analytic A_q oracle for constant and power weights.

    Other weights fall back to a finite ball-family estimate on ``grid``,
    which can only confirm that the estimate is finite.
    """
    if w.kind == "constant":
        return True
    if w.kind == "power":
        return power_weight_in_ap(w.a, q, n)
    if grid is None:
        raise WeightError(f"no analytic membership oracle for {w.spec()}; pass a grid")
    est = ap_characteristic(w, q, build_ball_family(grid))
    return bool(np.isfinite(est.value))


def verify_memberships(hp: HerzParams, n: int, grid: Grid | None = None) -> None:
    if not declared_membership_ok(hp.w1, hp.q1, n, grid):
        raise HerzError(f"w1 = {hp.w1.spec()} is not in A_{hp.q1:g}")
    if not declared_membership_ok(hp.w2, hp.q2, n, grid):
        raise HerzError(f"w2 = {hp.w2.spec()} is not in A_{hp.q2:g}")


@dataclass(frozen=True)
class TailReport:
    inner_tail: float
    outer_tail: float
    relative_bound: float


def _coef(hp: HerzParams, grid: Grid, k: int) -> float:
    if hp.alpha == 0:
        return 1.0
    wb = ball_measure(hp.w1, np.zeros(grid.dim), 2.0**k, grid)
    return wb ** (hp.alpha * hp.p / grid.dim)


def _pieces(grid: Grid, annuli: Annuli, homogeneous: bool) -> list[tuple[int, np.ndarray]]:
    """(k, cell mask) pairs making up the window."""
    if homogeneous:
        return [(k, annuli.mask(k)) for k in annuli.ks]
    if annuli.k_max < 0:
        raise HerzError("non-homogeneous norm needs k_max >= 0")
    out = [(0, grid.radii <= 1.0)]
    out += [(k, annuli.mask(k)) for k in range(1, annuli.k_max + 1)]
    return out


def herz_norm_values(values: np.ndarray, grid: Grid, hp: HerzParams, annuli: Annuli) -> tuple[np.ndarray, list[TailReport]]:
    """Herz norms of a batch of value arrays, shape (F, X) -> (F,)."""
    vals = np.atleast_2d(values)
    wq = np.abs(vals) ** hp.q * hp.w2.values_on(grid)[None, :] * grid.cell_volume
    total = np.zeros(vals.shape[0])
    for k, m in _pieces(grid, annuli, hp.homogeneous):
        lq = np.sum(wq[:, m], axis=1) ** (1.0 / hp.q)
        total += _coef(hp, grid, k) * lq**hp.p
    norms = total ** (1.0 / hp.p)

    # cells outside the window, grouped by their own annulus
    shells = annuli.shell_index()
    covered = np.zeros(grid.size, dtype=bool)
    for _, m in _pieces(grid, annuli, hp.homogeneous):
        covered |= m
    inner = ~covered & (grid.radii <= 2.0**annuli.k_min)
    outer = ~covered & ~inner
    tails = []
    for i in range(vals.shape[0]):
        extra = 0.0
        for region in (inner, outer):
            for k in np.unique(shells[region]):
                m = region & (shells == k)
                lq = np.sum(wq[i, m]) ** (1.0 / hp.q)
                if lq > 0:
                    try:
                        extra += _coef(hp, grid, int(k)) * lq**hp.p
                    except WeightError:
                        extra = math.inf
        in_t = float(np.sum(wq[i, inner]) ** (1.0 / hp.q))
        out_t = float(np.sum(wq[i, outer]) ** (1.0 / hp.q))
        n = norms[i]
        rel = 0.0 if extra == 0 else (math.inf if n == 0 else float((n**hp.p + extra) ** (1.0 / hp.p) / n - 1.0))
        tails.append(TailReport(in_t, out_t, rel))
    return norms, tails


def herz_norm(f: GridFunction, hp: HerzParams, annuli: Annuli | None = None) -> tuple[float, TailReport]:
    annuli = annuli or Annuli.default(f.grid)
    norms, tails = herz_norm_values(f.values[None, :], f.grid, hp, annuli)
    return float(norms[0]), tails[0]


# ---------------------------------------------------------------------------
# weak norms


def default_levels(values: np.ndarray, ratio: float = 1.05, exact_limit: int = 10_000) -> np.ndarray:
    """Geometric levels over the positive range of |values| plus, when there are
    at most ``exact_limit`` of them, every distinct |value|."""
    a = np.abs(np.asarray(values)).ravel()
    pos = a[a > 0]
    if pos.size == 0:
        return np.array([1.0])
    lo, hi = pos.min(), pos.max()
    count = int(math.ceil((math.log(hi) - math.log(lo)) / math.log(ratio))) + 1 if hi > lo else 1
    levels = np.exp(math.log(lo) + math.log(ratio) * np.arange(count))
    distinct = np.unique(pos)
    if distinct.size <= exact_limit:
        return np.union1d(levels[levels < hi], distinct)
    return np.union1d(levels[levels < hi], [hi])


def _level_measures(a: np.ndarray, wts: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """w({|f| >= lam}) for each level, via one sort."""
    order = np.argsort(-a, kind="stable")
    sa, cw = a[order], np.cumsum(wts[order])
    # number of entries >= lam in the descending array
    cnt = np.searchsorted(-sa, -levels, side="right")
    return np.where(cnt > 0, cw[np.maximum(cnt - 1, 0)], 0.0)


def weak_herz_values(
    values: np.ndarray, grid: Grid, hp: HerzParams, annuli: Annuli, levels: np.ndarray | None = None
) -> np.ndarray:
    """Weak Herz norms of a batch, shape (F, X) -> (F,).

    For each level the sets are {|f| >= lam}, the left limit of {|f| > lam'}
    as lam' increases to lam, so every candidate is a value the sup over
    lam > 0 approaches.
    """
    vals = np.atleast_2d(values)
    w2 = hp.w2.values_on(grid) * grid.cell_volume
    pieces = _pieces(grid, annuli, hp.homogeneous)
    out = np.zeros(vals.shape[0])
    for i in range(vals.shape[0]):
        a = np.abs(vals[i])
        lv = default_levels(a) if levels is None else np.asarray(levels, float)
        if lv.size == 0:
            raise HerzError("empty level grid")
        if np.any(lv <= 0):
            raise HerzError("levels must be positive")
        if not np.any(a > 0):
            continue
        acc = np.zeros(lv.size)
        for k, m in pieces:
            meas = _level_measures(a[m], w2[m], lv)
            acc += _coef(hp, grid, k) * meas ** (hp.p / hp.q)
        out[i] = float(np.max(lv * acc ** (1.0 / hp.p)))
    return out


def weak_herz_norm(
    f: GridFunction, hp: HerzParams, annuli: Annuli | None = None, levels=None
) -> float:
    annuli = annuli or Annuli.default(f.grid)
    return float(weak_herz_values(f.values[None, :], f.grid, hp, annuli, levels)[0])


def weak_lq_norm(f: GridFunction, q: float, w: Weight | None = None, levels=None) -> float:
    """sup over levels of lam * w({|f| >= lam})^(1/q) on the whole grid."""
    if not q > 0:
        raise HerzError(f"q must be positive, got {q}")
    a = np.abs(f.values)
    if not np.any(a > 0):
        return 0.0
    lv = default_levels(a) if levels is None else np.asarray(levels, float)
    if lv.size == 0:
        raise HerzError("empty level grid")
    wts = (np.ones(a.size) if w is None else w.values_on(f.grid)) * f.grid.cell_volume
    meas = _level_measures(a, wts, lv)
    return float(np.max(lv * meas ** (1.0 / q)))
