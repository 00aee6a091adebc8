"""Experiments confronting the computed operators with the boundedness theorems.

"Bounded" is operationalised as a finite corpus maximum of
||op f|| / ||f|| that stays put (within 25%) under one grid refinement and
under doubling the corpus.  That is evidence, not proof, and every report
says which hypothesis clause it ran under.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .corpus import FAMILIES, CorpusSpec, corpus_fields
from .grid import Field, Grid, GridFunction, make_grid, sample, support_radius
from .herz import Annuli, HerzParams, declared_membership_ok, herz_norm_values, weak_herz_values
from .kernels import AField, KernelClassParams, KernelDictionary, a_beta_field, build_dictionary, default_lattice
from .sqfn import (
    ConeQuadratureSpec,
    QuadratureError,
    aperture_ladder_batch,
    g_beta_batch,
    g_star_batch,
    s_beta_batch,
)


class VerifyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# admissibility

CASES = (
    "Thm1.1(i)",
    "Thm1.1(ii)",
    "Thm1.2-endpoint",
    "Thm1.3(i)",
    "Thm1.3(ii)",
    "Thm1.4-endpoint",
    "inadmissible",
)

CLAUSE_LAMBDA = "λ > max{q2,3}"


@dataclass(frozen=True)
class ConditionVerdict:
    case: str
    w_equal: bool
    q_equal: bool
    q2_le_q: bool
    lower_ok: bool
    upper_ok: bool
    endpoint: bool
    lambda_ok: bool | None
    p_le_1: bool
    explanation: str

    @property
    def admissible(self) -> bool:
        return self.case != "inadmissible"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["admissible"] = self.admissible
        return d


def _isclose(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


def admissibility_check(hp: HerzParams, n: int, op: str = "S", lam: float | None = None) -> ConditionVerdict:
    """Classify a parameter tuple against the hypotheses of the four theorems.

    ``op`` is "S" or "G" (the intrinsic square function theorems; G is covered
    through pointwise comparability) or "G*" (the lambda theorems, which need
    ``lam``).  Pure function of its arguments.
    """
    if op not in ("S", "G", "G*"):
        raise VerifyError(f"unknown operator {op!r}")
    aq1 = hp.alpha * hp.q1
    bound = n * (1.0 - hp.q2 / hp.q)
    endpoint = _isclose(aq1, bound)
    w_equal = hp.w1 == hp.w2
    q_equal = hp.q1 == hp.q2
    q2_le_q = hp.q2 <= hp.q
    lower_ok = -n * hp.q1 / hp.q < aq1
    upper_ok = aq1 < bound and not endpoint
    p_le_1 = hp.p <= 1
    lambda_ok = None if op != "G*" else (lam is not None and lam > max(hp.q2, 3.0))
    names = {"S": ("Thm1.1", "Thm1.2"), "G": ("Thm1.1", "Thm1.2"), "G*": ("Thm1.3", "Thm1.4")}[op]

    def verdict(case: str, why: str) -> ConditionVerdict:
        return ConditionVerdict(case, w_equal, q_equal, q2_le_q, lower_ok, upper_ok, endpoint, lambda_ok, p_le_1, why)

    if op == "G*" and not lambda_ok:
        return verdict("inadmissible", f"violates {CLAUSE_LAMBDA} (lambda = {lam}, q2 = {hp.q2:g})")
    if not q2_le_q:
        return verdict("inadmissible", f"violates q2 ≤ q (q2 = {hp.q2:g}, q = {hp.q:g})")
    if endpoint:
        if not p_le_1:
            return verdict("inadmissible", f"endpoint α·q1 = n(1 − q2/q) needs p ≤ 1 (p = {hp.p:g})")
        return verdict(f"{names[1]}-endpoint", f"α·q1 = n(1 − q2/q) = {bound:g} with p ≤ 1")
    if not upper_ok:
        return verdict("inadmissible", f"violates α·q1 < n(1 − q2/q) ({aq1:g} ≥ {bound:g})")
    if w_equal:
        if not q_equal:
            return verdict(
                "inadmissible",
                f"w1 = w2 needs q1 = q2 (clause (i)); q1 = {hp.q1:g}, q2 = {hp.q2:g} is out-of-hypothesis",
            )
        if not lower_ok:
            return verdict("inadmissible", f"violates −n·q1/q < α·q1 ({aq1:g} ≤ {-n * hp.q1 / hp.q:g})")
        return verdict(f"{names[0]}(i)", f"w1 = w2, q1 = q2 ≤ q, {-n * hp.q1 / hp.q:g} < α·q1 < {bound:g}")
    if not aq1 > 0:
        return verdict("inadmissible", f"w1 ≠ w2 needs 0 < α·q1 (clause (ii)); α·q1 = {aq1:g}")
    return verdict(f"{names[0]}(ii)", f"w1 ≠ w2, q2 ≤ q, 0 < α·q1 < {bound:g}")


# ---------------------------------------------------------------------------
# experiment setup


@dataclass(frozen=True)
class Setup:
    """Grid, dictionary and lattice choices shared by the sweeps."""

    dim: int = 1
    halfwidth: float = 8.0
    m: int = 256
    beta: float = 1.0
    dict_size: int = 8
    dict_seed: int = 0
    stride: int = 1
    t_ratio: float = 2.0**0.25
    threads: int | None = None

    def grid(self, m: int | None = None) -> Grid:
        return make_grid(self.dim, self.halfwidth, m or self.m)

    def dictionary(self, size: int | None = None) -> KernelDictionary:
        return _dictionary(self.beta, size or self.dict_size, self.dict_seed, self.dim)

    def quad(self, grid: Grid) -> ConeQuadratureSpec:
        return ConeQuadratureSpec(default_lattice(grid, self.stride, self.t_ratio))

    def spec(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        return d


@lru_cache(maxsize=16)
def _dictionary(beta: float, size: int, seed: int, dim: int) -> KernelDictionary:
    return build_dictionary(KernelClassParams(beta), size, seed, dim)


@dataclass(frozen=True)
class OperatorSpec:
    name: str = "S"
    gamma: float = 1.0
    lam: float | None = None

    def __post_init__(self):
        if self.name not in ("S", "G", "G*"):
            raise VerifyError(f"operator must be S, G or G*, got {self.name!r}")
        if self.name == "G*" and self.lam is None:
            raise VerifyError("G* needs lambda")

    def apply(self, af: AField) -> np.ndarray:
        if self.name == "S":
            return s_beta_batch(af, self.gamma)
        if self.name == "G":
            return g_beta_batch(af)
        return g_star_batch(af, self.lam)

    def label(self) -> str:
        if self.name == "S":
            return f"S_beta,{self.gamma:g}"
        return "G_beta" if self.name == "G" else f"G*_{self.lam:g}"


def member_label(i: int) -> str:
    return f"c{i:03d}-{FAMILIES[i % 4]}"


# ---------------------------------------------------------------------------
# ratio sweeps


@dataclass
class RatioReport:
    operator: str
    weak: bool
    verdict: ConditionVerdict
    herz: dict
    setup: dict
    corpus: dict
    window: dict
    members: list[dict]
    skipped: list[str]
    max_ratio: float
    refined_max_ratio: float
    doubled_max_ratio: float
    refinement_change: float
    corpus_change: float
    resolutions: list[int]
    max_output_tail: float
    max_truncated_fraction: float
    chebyshev_ok: bool | None
    label: str

    @property
    def passed(self) -> bool:
        return self.label == "PASS"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.to_dict()
        return d


def _evaluate(
    op: OperatorSpec,
    hp: HerzParams,
    setup: Setup,
    fields: Sequence[Field],
    m: int,
    window: tuple[int, int],
    weak: bool,
) -> dict:
    grid = setup.grid(m)
    annuli = Annuli(grid, *window)
    fs = [sample(f, grid) for f in fields]
    vals = np.stack([f.values for f in fs])
    in_norms, _ = herz_norm_values(vals, grid, hp, annuli)
    af = a_beta_field(fs, setup.dictionary(), setup.quad(grid).lattice, threads=setup.threads)
    out = op.apply(af)
    strong, tails = herz_norm_values(out, grid, hp, annuli)
    res = {
        "in": in_norms,
        "strong": strong,
        "tail": np.array([t.relative_bound for t in tails]),
        "trunc": af.truncated_fraction(),
    }
    if weak:
        res["weak"] = weak_herz_values(out, grid, hp, annuli)
    return res


def _max_ratio(num: np.ndarray, den: np.ndarray) -> float:
    keep = den > 0
    if not np.any(keep):
        return math.nan
    return float(np.max(num[keep] / den[keep]))


def _change(a: float, b: float) -> float:
    if not (math.isfinite(a) and math.isfinite(b)) or a == 0:
        return math.inf
    return abs(b / a - 1.0)


def _sweep(
    op: OperatorSpec,
    hp: HerzParams,
    setup: Setup,
    corpus: CorpusSpec,
    weak: bool,
    explore: bool,
    refine: bool = True,
    tolerance: float = 0.25,
) -> RatioReport:
    if corpus.dim != setup.dim:
        raise VerifyError("corpus and setup dimensions differ")
    verdict = admissibility_check(hp, setup.dim, op.name, op.lam)
    if verdict.admissible and weak != verdict.case.endswith("endpoint"):
        why = (
            "weak-type sweep needs the endpoint α·q1 = n(1 − q2/q)"
            if weak
            else "at the endpoint α·q1 = n(1 − q2/q) only the weak-type bound is covered"
        )
        verdict = dataclasses.replace(verdict, case="inadmissible", explanation=why)
    if not verdict.admissible and not explore:
        raise InadmissibleError(verdict)
    for w, qq, name in ((hp.w1, hp.q1, "w1"), (hp.w2, hp.q2, "w2")):
        if not declared_membership_ok(w, qq, setup.dim, setup.grid()):
            raise VerifyError(f"{name} = {w.spec()} is not in A_{qq:g}")

    base_grid = setup.grid()
    default = Annuli.default(base_grid)
    window = (default.k_min, default.k_max)
    fields = corpus_fields(corpus)
    doubled_fields = corpus_fields(CorpusSpec(**{**corpus.spec(), "size": 2 * corpus.size}))

    base = _evaluate(op, hp, setup, fields, setup.m, window, weak)
    key = "weak" if weak else "strong"
    extra = _evaluate(op, hp, setup, doubled_fields[corpus.size:], setup.m, window, weak)
    refined = _evaluate(op, hp, setup, fields, 2 * setup.m, window, weak) if refine else None

    members, skipped = [], []
    for i, f in enumerate(fields):
        label = member_label(i)
        if base["in"][i] == 0:
            skipped.append(label)
            continue
        row = {
            "id": label,
            "field": f.id,
            "in_norm": float(base["in"][i]),
            "out_norm": float(base[key][i]),
            "ratio": float(base[key][i] / base["in"][i]),
            "output_tail": float(base["tail"][i]),
            "truncated_fraction": float(base["trunc"][i]),
        }
        if weak:
            row["strong_out_norm"] = float(base["strong"][i])
            row["strong_ratio"] = float(base["strong"][i] / base["in"][i])
        members.append(row)

    mx = _max_ratio(base[key], base["in"])
    mx_d = _max_ratio(np.concatenate([base[key], extra[key]]), np.concatenate([base["in"], extra["in"]]))
    mx_r = _max_ratio(refined[key], refined["in"]) if refine else math.nan
    ch_r = _change(mx, mx_r)
    ch_d = _change(mx, mx_d)
    cheb = None
    if weak:
        cheb = bool(np.all(base["weak"] <= base["strong"]))
    if not verdict.admissible:
        label = "out-of-hypothesis"
    elif math.isfinite(mx) and ch_r < tolerance and ch_d < tolerance and cheb is not False:
        label = "PASS"
    else:
        label = "FAIL"
    return RatioReport(
        operator=op.label(),
        weak=weak,
        verdict=verdict,
        herz=hp.spec(),
        setup=setup.spec(),
        corpus=corpus.spec(),
        window={"k_min": window[0], "k_max": window[1]},
        members=members,
        skipped=skipped,
        max_ratio=mx,
        refined_max_ratio=mx_r,
        doubled_max_ratio=mx_d,
        refinement_change=ch_r,
        corpus_change=ch_d,
        resolutions=[setup.m, 2 * setup.m] if refine else [setup.m],
        max_output_tail=float(np.max(base["tail"])),
        max_truncated_fraction=float(np.max(base["trunc"])),
        chebyshev_ok=cheb,
        label=label,
    )


class InadmissibleError(VerifyError):
    def __init__(self, verdict: ConditionVerdict):
        super().__init__(f"inadmissible parameters: {verdict.explanation}")
        self.verdict = verdict


def theorem_ratio_sweep(
    op: OperatorSpec,
    hp: HerzParams,
    setup: Setup,
    corpus: CorpusSpec,
    explore: bool = False,
    refine: bool = True,
) -> RatioReport:
    """Strong-type ratios ||op f||_K / ||f||_K over the corpus.

    Inadmissible tuples raise :class:`InadmissibleError` unless ``explore``
    is set, in which case the report is tagged out-of-hypothesis.
    """
    return _sweep(op, hp, setup, corpus, weak=False, explore=explore, refine=refine)


def weak_type_sweep(
    op: OperatorSpec,
    hp: HerzParams,
    setup: Setup,
    corpus: CorpusSpec,
    explore: bool = False,
    refine: bool = True,
) -> RatioReport:
    """Endpoint ratios ||op f||_WK / ||f||_K, with the strong ratio alongside."""
    return _sweep(op, hp, setup, corpus, weak=True, explore=explore, refine=refine)


# ---------------------------------------------------------------------------
# aperture scaling


@dataclass
class ScalingReport:
    js: list[int]
    norms: list[float]
    slope: float
    cap: float
    q: float
    q2: float
    weight: str
    function: str
    passed: bool | None

    def to_dict(self) -> dict:
        return asdict(self)


def scaling_cap(n: int, q: float, q2: float) -> float:
    return n * q2 / 2.0 if q >= 2 else n * q2 / q


def aperture_scaling_study(
    f: GridFunction,
    dictionary: KernelDictionary,
    j_max: int,
    w,
    q: float,
    q2: float,
    quad: ConeQuadratureSpec | None = None,
    slack: float = 0.1,
) -> ScalingReport:
    """log2 ||S_{beta,2^j} f||_{L^q_w} against j, least squares on j = 1..j_max.

    With j_max = 1 the fit falls back to j = 0, 1; with j_max = 0 there is no
    slope and the report carries the single value.
    """
    if not q > 1:
        raise VerifyError(f"q must exceed 1, got {q}")
    grid = f.grid
    if not declared_membership_ok(w, q2, grid.dim, grid):
        raise VerifyError(f"weight {w.spec()} is not in A_{q2:g}")
    quad = quad or ConeQuadratureSpec.default(grid)
    af = a_beta_field(f, dictionary, quad.lattice)
    try:
        ladder = aperture_ladder_batch(af, j_max)
    except QuadratureError as exc:
        raise VerifyError(f"aperture ladder infeasible: {exc}") from exc
    wv = w.values_on(grid) * grid.cell_volume
    norms = [float(np.sum(np.abs(v[0]) ** q * wv) ** (1.0 / q)) for v in ladder]
    js = list(range(j_max + 1))
    cap = scaling_cap(grid.dim, q, q2)
    if j_max == 0:
        slope, passed = math.nan, None
    else:
        lo = 1 if j_max >= 2 else 0
        slope = float(np.polyfit(js[lo:], np.log2(norms[lo:]), 1)[0])
        passed = bool(slope <= cap + slack)
    return ScalingReport(js, norms, slope, cap, q, q2, w.spec(), f.id, passed)


# ---------------------------------------------------------------------------
# comparability of S_beta and G_beta


@dataclass
class ComparabilityReport:
    sizes: list[int]
    envelopes: list[float]
    members: list[dict]
    skipped: list[str]
    change: float
    stable: bool

    def to_dict(self) -> dict:
        return asdict(self)


def pointwise_envelope(s: np.ndarray, g: np.ndarray, mask: np.ndarray) -> tuple[float, int]:
    """max of max(S/G, G/S) over ``mask`` restricted to S >= 1% of max S."""
    sig = mask & (s >= 0.01 * s.max())
    if not np.any(sig):
        return math.nan, 0
    ss, gg = s[sig], g[sig]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.maximum(ss / gg, gg / ss)
    return float(np.max(r)), int(sig.sum())


def comparability_study(
    corpus: Sequence[GridFunction],
    dictionary: KernelDictionary,
    quad: ConeQuadratureSpec | None = None,
    sizes: Sequence[int] = (4, 32),
    tolerance: float = 0.30,
) -> ComparabilityReport:
    """Envelope of S/G and G/S over significant points, per dictionary size.

    Points are significant when S(x) >= 1% of max S.  Only points x with
    |x| + support radius of f <= t_max are used: there the t ladder reaches
    scales whose balls contain the whole support, so neither operator is cut
    off by the finite ladder.  Sizes larger than ``dictionary`` are an error.
    """
    if not corpus:
        raise VerifyError("empty corpus")
    grid = corpus[0].grid
    quad = quad or ConeQuadratureSpec.default(grid)
    t_max = float(quad.lattice.ts[-1])
    if max(sizes) > dictionary.size:
        raise VerifyError(f"dictionary has {dictionary.size} members, need {max(sizes)}")
    live = [(i, f) for i, f in enumerate(corpus) if np.any(f.values != 0)]
    skipped = [member_label(i) for i, f in enumerate(corpus) if not np.any(f.values != 0)]
    rows = [{"id": member_label(i), "field": f.id, "envelopes": [], "points": []} for i, f in live]
    envs = []
    for size in sizes:
        if not live:
            envs.append(math.nan)
            continue
        af = a_beta_field([f for _, f in live], dictionary.subset(size), quad.lattice)
        S, G = s_beta_batch(af, 1.0), g_beta_batch(af)
        for row, (_, f), s, g in zip(rows, live, S, G):
            resolved = grid.radii + support_radius(f) <= t_max
            e, cnt = pointwise_envelope(s, g, resolved)
            row["envelopes"].append(e)
            row["points"].append(cnt)
        envs.append(float(np.nanmax([r["envelopes"][-1] for r in rows])))
    change = _change(envs[0], envs[-1])
    return ComparabilityReport(list(sizes), envs, rows, skipped, change, bool(change < tolerance and all(map(math.isfinite, envs))))


# ---------------------------------------------------------------------------
# refinement


@dataclass
class ConvergenceReport:
    ms: list[int]
    values: list[float]
    deltas: list[float]
    non_cauchy: bool

    def to_dict(self) -> dict:
        return asdict(self)


def refinement_study(
    compute: Callable[[int], float],
    m0: int,
    levels: int,
    max_m: int = 1 << 16,
) -> ConvergenceReport:
    """Evaluate ``compute`` at m0, 2 m0, 4 m0, ... and track relative deltas.

    The flag ``non_cauchy`` is raised when a delta grows from one level to
    the next.
    """
    if levels < 2:
        raise VerifyError("a refinement study needs at least two levels")
    top = m0 * 2 ** (levels - 1)
    if top > max_m:
        raise VerifyError(f"top resolution m = {top} exceeds the budget {max_m}")
    ms = [m0 * 2**i for i in range(levels)]
    values = [float(compute(m)) for m in ms]
    deltas = []
    for a, b in zip(values, values[1:]):
        deltas.append(0.0 if a == b else abs(b - a) / max(abs(a), abs(b)))
    non_cauchy = any(d2 > d1 for d1, d2 in zip(deltas, deltas[1:]))
    return ConvergenceReport(ms, values, deltas, non_cauchy)
