"""Deterministic test-function corpus for the ratio sweeps.

Four families are interleaved by index: annulus indicators, smooth bumps,
seeded piecewise-constant functions on dyadic cubes, and members concentrated
near the origin.  Member ``i`` depends only on ``(seed, i)``, so a corpus of
size 40 starts with the corpus of size 20.  Every member vanishes on the
residual ball ``|x| <= inner`` and outside ``|x| <= outer``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, GridFunction, field_from_spec, sample

FAMILIES = ("annulus", "bump", "steps", "origin")


@dataclass(frozen=True)
class CorpusSpec:
    size: int = 20
    seed: int = 0
    dim: int = 1
    inner: float = 0.125
    outer: float = 2.0
    min_scale: float = 0.25

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("corpus size must be positive")
        if not 0 < self.inner < self.outer:
            raise ValueError(f"need 0 < inner < outer, got {self.inner}, {self.outer}")
        if self.outer - self.inner < 2 * self.min_scale:
            raise ValueError("support shell is thinner than two minimum scales")

    def spec(self) -> dict:
        return {
            "size": self.size,
            "seed": self.seed,
            "dim": self.dim,
            "inner": self.inner,
            "outer": self.outer,
            "min_scale": self.min_scale,
        }


def _direction(rng: np.random.Generator, dim: int) -> tuple[float, ...]:
    if dim == 1:
        return (1.0 if rng.random() < 0.5 else -1.0,)
    theta = rng.uniform(0, 2 * math.pi)
    return (math.cos(theta), math.sin(theta))


def _member(spec: CorpusSpec, i: int) -> Field:
    rng = np.random.default_rng([spec.seed, i])
    family = FAMILIES[i % 4]
    r0, r1, s = spec.inner, spec.outer, spec.min_scale
    if family == "annulus":
        # dyadic annuli first, then seeded shells
        ks = [k for k in range(math.floor(math.log2(r0)) + 1, math.floor(math.log2(r1)) + 1) if 2.0**k - 2.0 ** (k - 1) >= s]
        slot = i // 4
        if slot < len(ks):
            k = ks[-1 - slot]
            return field_from_spec("annulus", inner=2.0 ** (k - 1), outer=2.0**k, amp=1.0)
        a = float(rng.uniform(r0, r1 - s))
        b = float(rng.uniform(a + s, r1))
        return field_from_spec("annulus", inner=a, outer=b, amp=float(rng.uniform(0.5, 2.0)))
    if family == "bump":
        rho = float(rng.uniform(s, (r1 - r0) / 2))
        c = float(rng.uniform(r0 + rho, r1 - rho))
        center = tuple(c * u for u in _direction(rng, spec.dim))
        return field_from_spec("bump", center=center, radius=rho, amp=float(rng.uniform(0.5, 2.0)))
    if family == "steps":
        cell = s
        per_axis = int(round(2 * r1 / cell))
        count = per_axis**spec.dim
        vals = rng.normal(size=count)
        # zero every cube that reaches into the residual ball or past outer
        centers1 = -r1 + cell * (np.arange(per_axis) + 0.5)
        grids = np.meshgrid(*([centers1] * spec.dim), indexing="ij")
        cr = np.sqrt(sum(g.ravel() ** 2 for g in grids))
        half_diag = cell * math.sqrt(spec.dim) / 2
        vals[(cr - half_diag <= r0) | (cr + half_diag > r1)] = 0.0
        if not np.any(vals):
            vals[np.argmax(cr <= r1)] = 1.0
        return field_from_spec("dyadic_steps", cell=cell, radius=r1, values=tuple(float(v) for v in vals))
    # near-origin stress: |x|^-a just outside the residual ball
    a = float(rng.uniform(0.2, 0.8))
    top = float(rng.uniform(max(2 * r0, r0 + s), min(1.0, r1) if r1 > r0 + s else r1))
    return field_from_spec("power", a=-a, amp=1.0, cutoff=max(top, r0 + s), inner=r0)


def corpus_fields(spec: CorpusSpec) -> list[Field]:
    return [_member(spec, i) for i in range(spec.size)]


def sample_corpus(spec: CorpusSpec, grid: Grid) -> list[GridFunction]:
    if grid.dim != spec.dim:
        raise ValueError(f"corpus dimension {spec.dim} does not match grid dimension {grid.dim}")
    return [sample(f, grid) for f in corpus_fields(spec)]
