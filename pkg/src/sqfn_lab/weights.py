"""Weights, weighted ball measures and finite-family A_p / RH_r / doubling estimates.

Every "for every ball" supremum is replaced by a maximum over a finite
:class:`BallFamily`, so the characteristic constants computed here are lower
bounds of the true ones.  Averages are discrete cell averages: the sum of
cell-centre values divided by the number of cells in the ball.
"""
from __future__ import annotations

import math
import shlex
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Annulus, Ball, Grid, GridFunction, RegionSpec, read_csv, unit_ball_volume


class WeightError(ValueError):
    pass


@dataclass(frozen=True)
class Weight:
    """Nonnegative weight.  Build with :func:`constant`, :func:`power`,
    :func:`product` or :func:`sampled` rather than directly."""

    kind: str
    c: float = 1.0
    a: float = 0.0
    factors: tuple["Weight", ...] = ()
    data: GridFunction | None = field(default=None, compare=False, repr=False)
    data_id: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[-1]
        if self.kind == "constant":
            return np.full(x.shape[0], self.c)
        if self.kind == "power":
            if not self.a > -n:
                raise WeightError(f"|x|^{self.a} is not locally integrable in dimension {n} (need a > -{n})")
            r = np.sqrt(np.sum(x**2, axis=-1))
            return self.c * r**self.a
        if self.kind == "product":
            out = np.ones(x.shape[0])
            for w in self.factors:
                out = out * w(x)
            return out
        if self.kind == "sampled":
            raise WeightError("sampled weights are only defined on their own grid; use values_on(grid)")
        raise WeightError(f"unknown weight kind {self.kind!r}")

    def values_on(self, grid: Grid) -> np.ndarray:
        if self.kind == "sampled":
            if self.data.grid != grid:
                raise WeightError("sampled weight lives on a different grid")
            return self.data.values
        if self.kind == "product" and any(w.kind == "sampled" for w in self.factors):
            out = np.ones(grid.size)
            for w in self.factors:
                out = out * w.values_on(grid)
            return out
        return self(grid.points)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def scaled(self, s: float) -> "Weight":
        if self.kind in ("constant", "power"):
            return Weight(self.kind, self.c * s, self.a)
        return product(constant(s), self)

    def spec(self) -> str:
        if self.kind == "constant":
            return f"kind=constant c={self.c!r}"
        if self.kind == "power":
            return f"kind=power a={self.a!r}" + ("" if self.c == 1.0 else f" c={self.c!r}")
        if self.kind == "product":
            return "kind=product of=" + ",".join(_factor_token(w) for w in self.factors)
        return f"kind=sampled file={self.data_id}"


def _factor_token(w: Weight) -> str:
    if w.kind == "constant":
        return f"constant:{w.c!r}"
    if w.kind == "power":
        return f"power:{w.a!r}"
    if w.kind == "sampled":
        return f"sampled:{w.data_id}"
    raise WeightError("nested products are not expressible in a weight spec")


def constant(c: float = 1.0) -> Weight:
    if not c > 0:
        raise WeightError(f"constant weight needs c > 0, got {c}")
    return Weight("constant", c=float(c))


def power(a: float, c: float = 1.0) -> Weight:
    if not c > 0:
        raise WeightError(f"power weight needs c > 0, got {c}")
    return Weight("power", c=float(c), a=float(a))


def product(*ws: Weight) -> Weight:
    if len(ws) < 2:
        raise WeightError("a product weight needs at least two factors")
    return Weight("product", factors=tuple(ws))


def sampled(f: GridFunction, data_id: str = "") -> Weight:
    if np.any(f.values < 0):
        raise WeightError("sampled weight has negative values")
    return Weight("sampled", data=f, data_id=data_id or f.id)


def parse_weight(spec: str) -> Weight:
    """Parse ``kind=power a=0.5``, ``kind=constant c=1.0``,
    ``kind=product of=power:0.5,constant:2`` or ``kind=sampled file=w.csv``."""
    try:
        fields = dict(tok.split("=", 1) for tok in shlex.split(spec))
    except ValueError as exc:
        raise WeightError(f"malformed weight spec {spec!r}") from exc
    kind = fields.pop("kind", None)
    allowed = {"constant": {"c"}, "power": {"a", "c"}, "product": {"of"}, "sampled": {"file"}}
    if kind not in allowed:
        raise WeightError(f"weight spec {spec!r}: kind must be one of {sorted(allowed)}")
    extra = set(fields) - allowed[kind]
    if extra:
        raise WeightError(f"weight spec {spec!r}: unknown field(s) {sorted(extra)} for kind={kind}")
    if kind == "constant":
        return constant(float(fields.get("c", 1.0)))
    if kind == "power":
        if "a" not in fields:
            raise WeightError(f"weight spec {spec!r}: power weight needs a=")
        return power(float(fields["a"]), float(fields.get("c", 1.0)))
    if kind == "sampled":
        return sampled(read_csv(fields["file"]), fields["file"])
    factors = []
    for tok in fields.get("of", "").split(","):
        name, _, val = tok.partition(":")
        if name == "constant":
            factors.append(constant(float(val)))
        elif name == "power":
            factors.append(power(float(val)))
        elif name == "sampled":
            factors.append(sampled(read_csv(val), val))
        else:
            raise WeightError(f"weight spec {spec!r}: bad product factor {tok!r}")
    return product(*factors)


# ---------------------------------------------------------------------------
# measures


def _closed_form_ball(w: Weight, center, radius: float, n: int) -> float | None:
    if w.kind == "constant":
        return w.c * unit_ball_volume(n) * radius**n
    if w.kind == "power" and np.allclose(center, 0.0, atol=0.0):
        # surface area of the unit sphere is n * v_n
        return w.c * n * unit_ball_volume(n) * radius ** (n + w.a) / (n + w.a)
    return None


def ball_measure(
    w: Weight, center, radius: float, grid: Grid | None = None, closed_form: bool = True
) -> float:
    """w(B(center, radius)); closed form for constant weights and origin-centred
    power weights, otherwise a cell sum on ``grid``."""
    if not radius > 0:
        raise WeightError(f"radius must be positive, got {radius}")
    center = np.atleast_1d(np.asarray(center, float))
    n = grid.dim if grid is not None else center.size
    center = np.broadcast_to(center, (n,))
    if closed_form:
        v = _closed_form_ball(w, center, radius, n)
        if v is not None:
            return v
    if grid is None:
        raise WeightError(f"no closed form for {w.spec()} on this ball; a grid is required")
    if np.max(np.abs(center)) + radius > grid.halfwidth + 1e-12:
        raise WeightError(f"ball B({center.tolist()}, {radius}) leaves the grid domain")
    mask = Ball(tuple(center), radius).mask(grid)
    return float(np.sum(w.values_on(grid)[mask]) * grid.cell_volume)


def weighted_measure(w: Weight, region: RegionSpec, grid: Grid, closed_form: bool = True) -> float:
    if closed_form and grid is not None:
        if isinstance(region, Ball) and np.allclose(region.center, 0.0, atol=0.0):
            v = _closed_form_ball(w, np.zeros(grid.dim), region.radius, grid.dim)
            if v is not None:
                return v
        if isinstance(region, Annulus):
            hi = _closed_form_ball(w, np.zeros(grid.dim), region.outer, grid.dim)
            lo = _closed_form_ball(w, np.zeros(grid.dim), region.inner, grid.dim)
            if hi is not None and lo is not None:
                return hi - lo
    mask = region.mask(grid)
    return float(np.sum(w.values_on(grid)[mask]) * grid.cell_volume)


# ---------------------------------------------------------------------------
# ball families


@dataclass(frozen=True)
class BallFamily:
    grid: Grid
    centers: tuple[tuple[float, ...], ...]
    radii: tuple[float, ...]

    def __post_init__(self):
        if not self.centers or not self.radii:
            raise WeightError("ball family is empty")
        for c, r in zip(self.centers, self.radii):
            if max(abs(v) for v in c) + r > self.grid.halfwidth + 1e-12:
                raise WeightError(f"ball B({c}, {r}) leaves the domain")

    def __len__(self) -> int:
        return len(self.radii)

    def masks(self) -> np.ndarray:
        pts = self.grid.points
        c = np.asarray(self.centers, float)[:, None, :]
        d2 = np.sum((pts[None, :, :] - c) ** 2, axis=-1)
        return d2 <= np.asarray(self.radii)[:, None] ** 2

    def ball_id(self, i: int) -> str:
        return f"B({list(self.centers[i])},{self.radii[i]!r})"


def build_ball_family(
    grid: Grid,
    centers_per_axis: int = 5,
    radius_ratio: float = 2.0,
    min_radius: float | None = None,
    origin_only: bool = False,
) -> BallFamily:
    """Origin plus a coarse lattice of centres, radii geometric in (2h, L].

    Origin-centred balls come first.  Balls that would leave the domain are
    dropped.
    """
    L = grid.halfwidth
    r0 = min_radius if min_radius is not None else 2.0 * grid.h * 1.0001
    radii = []
    r = L
    while r > r0:
        radii.append(r)
        r /= radius_ratio
    radii = radii[::-1]
    origin = (0.0,) * grid.dim
    cs = [origin]
    if not origin_only:
        ax = np.linspace(-L, L, centers_per_axis + 2)[1:-1]
        grids = np.meshgrid(*([ax] * grid.dim), indexing="ij")
        for c in zip(*(g.ravel() for g in grids)):
            c = tuple(float(v) for v in c)
            if c != origin:
                cs.append(c)
    out_c, out_r = [], []
    for c in cs:
        for r in radii:
            if max(abs(v) for v in c) + r <= L + 1e-12:
                out_c.append(c)
                out_r.append(r)
    return BallFamily(grid, tuple(out_c), tuple(out_r))


# ---------------------------------------------------------------------------
# characteristic constants


@dataclass(frozen=True)
class ApEstimate:
    p: float
    value: float
    worst_ball: str
    per_ball: tuple[float, ...] = field(repr=False, default=())


def _ball_averages(values: np.ndarray, masks: np.ndarray) -> np.ndarray:
    counts = masks.sum(axis=1)
    return (masks @ values) / counts


def ap_characteristic(w: Weight, p: float, family: BallFamily) -> ApEstimate:
    """Largest A_p product over the family (a lower bound of [w]_{A_p})."""
    if p < 1:
        raise WeightError(f"p must be >= 1, got {p}")
    wv = w.values_on(family.grid)
    masks = family.masks().astype(float)
    avg_w = _ball_averages(wv, masks)
    if p == 1:
        mins = np.array([wv[m > 0].min() for m in masks])
        with np.errstate(divide="ignore"):
            vals = avg_w / mins
    else:
        # (avg w^e)^(p-1) with e = -1/(p-1) overflows near p = 1, so shift
        # the exponent by its per-ball maximum before averaging
        e = -1.0 / (p - 1.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            ex = e * np.log(wv)
            top = np.where(masks > 0, ex[None, :], -np.inf).max(axis=1)
            terms = np.where(masks > 0, np.exp(ex[None, :] - top[:, None]), 0.0)
            shifted = np.where(np.isfinite(top), terms.sum(axis=1) / masks.sum(axis=1), 1.0)
            vals = avg_w * np.exp((p - 1.0) * top) * shifted ** (p - 1.0)
    i = int(np.argmax(vals))
    return ApEstimate(p, float(vals[i]), family.ball_id(i), tuple(float(v) for v in vals))


def rh_constant(w: Weight, r: float, family: BallFamily) -> float:
    """max over the family of (avg w^r)^(1/r) / avg w."""
    if not r > 1:
        raise WeightError(f"reverse Hoelder exponent must exceed 1, got {r}")
    wv = w.values_on(family.grid)
    masks = family.masks().astype(float)
    vals = _ball_averages(wv**r, masks) ** (1.0 / r) / _ball_averages(wv, masks)
    return float(np.max(vals))


@dataclass(frozen=True)
class DoublingReport:
    lam: float
    p: float
    max_ratio: float
    tested: int
    skipped: int
    ap_estimate: float
    passed: bool


def doubling_check(w: Weight, family: BallFamily, lam: float, p: float, closed_form: bool = True) -> DoublingReport:
    """max over the family of w(lam B) / (lam^{np} w(B)); balls whose dilate
    leaves the domain are skipped unless a closed form covers them."""
    if not lam > 1:
        raise WeightError(f"dilation factor must exceed 1, got {lam}")
    grid = family.grid
    n = grid.dim
    ratios, skipped = [], 0
    for c, r in zip(family.centers, family.radii):
        c_arr = np.asarray(c)
        big = None
        if closed_form:
            big = _closed_form_ball(w, c_arr, lam * r, n)
        if big is None:
            if np.max(np.abs(c_arr)) + lam * r > grid.halfwidth + 1e-12:
                skipped += 1
                continue
            big = ball_measure(w, c_arr, lam * r, grid, closed_form=False)
        small = ball_measure(w, c_arr, r, grid, closed_form=closed_form)
        ratios.append(big / (lam ** (n * p) * small))
    ap = ap_characteristic(w, p, family).value
    mx = float(max(ratios)) if ratios else float("nan")
    return DoublingReport(lam, p, mx, len(ratios), skipped, ap, bool(ratios) and mx <= 1.5 * ap)


@dataclass(frozen=True)
class ComparisonReport:
    p: float
    r: float
    q_low: tuple[float, ...]
    q_high: tuple[float, ...]
    low_envelope: float
    high_envelope: float
    passed: bool


def measure_comparison_check(
    w: Weight, p: float, r: float, pairs: Sequence[tuple[RegionSpec, RegionSpec]], grid: Grid
) -> ComparisonReport:
    """Quotients of w(E)/w(B) against (|E|/|B|)^p and (|E|/|B|)^{(r-1)/r}.

    Lebesgue and weighted measures are both cell sums so that E = B gives
    quotients of exactly one.
    """
    ql, qh = [], []
    for e, b in pairs:
        me, mb = e.mask(grid), b.mask(grid)
        if np.any(me & ~mb):
            raise WeightError(f"{e} is not contained in {b} on this grid")
        le, lb = me.sum(), mb.sum()
        frac = le / lb
        wv = w.values_on(grid)
        wfrac = wv[me].sum() / wv[mb].sum()
        ql.append(float(wfrac / frac**p))
        qh.append(float(wfrac / frac ** ((r - 1.0) / r)))
    lo, hi = min(ql), max(qh)
    return ComparisonReport(p, r, tuple(ql), tuple(qh), lo, hi, lo > 0 and math.isfinite(hi))


def power_weight_refinement(
    a: float,
    p: float,
    levels: int = 3,
    m0: int = 256,
    halfwidth: float = 8.0,
    factor: int = 8,
    quantity: str = "ap",
    r: float = 2.0,
    origin_only: bool = False,
) -> list[float]:
    """A_p (or RH_r) estimates of |x|^a in n = 1 over successively refined
    grids (m0, m0*factor, ...).

    The smallest radius shrinks with h, so for weights outside the class the
    estimate grows like a negative power of h; a refinement factor of 8
    makes a growth rate of h^(-1/2) show up as more than a doubling per level.
    """
    out = []
    w = power(a)
    for k in range(levels):
        grid = Grid(1, halfwidth, m0 * factor**k)
        fam = build_ball_family(grid, origin_only=origin_only)
        if quantity == "ap":
            out.append(ap_characteristic(w, p, fam).value)
        else:
            out.append(rh_constant(w, r, fam))
    return out


def power_weight_in_ap(a: float, p: float, n: int = 1) -> bool:
    """Analytic membership of |x|^a in A_p: -n < a < n(p-1), or -n < a <= 0 for p = 1."""
    if p == 1:
        return -n < a <= 0
    return -n < a < n * (p - 1)


def minimal_ap_index(w: Weight, n: int = 1) -> float:
    """Smallest q with w in A_q for constant/power weights, A_1 when possible.

    Outside A_1 the admissible set of q is open, so this returns the smallest
    half-integer strictly above 1 + a/n.
    """
    if w.kind == "constant":
        return 1.0
    if w.kind == "power":
        if -n < w.a <= 0:
            return 1.0
        # need a < n (q - 1), i.e. q > 1 + a/n
        q = 1.0 + w.a / n
        return math.floor(2 * q) / 2 + 0.5
    raise WeightError(f"no analytic A_p index for {w.spec()}")
