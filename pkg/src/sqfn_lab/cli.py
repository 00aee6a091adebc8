"""``sqfn-lab <command> --config <path> [--set key=value]...``

Config files are flat ``section.key = value`` lines; ``#`` starts a comment.
Every key has a default, every default is written into the report, and
unknown keys are rejected with the file line that carried them.

Exit status: 0 on success, 2 when the parameters fall outside the theorem
hypotheses (unless ``run.explore = true``), 1 on any other error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CorpusSpec, corpus_fields, sample_corpus
from .grid import GridError, GridFunction, field_from_spec, lq_norm_weighted, make_grid, sample, write_csv
from .herz import Annuli, HerzError, HerzParams, herz_norm_values, weak_herz_values
from .kernels import KernelError, a_beta_field
from .sqfn import QuadratureError
from .verify import (
    InadmissibleError,
    OperatorSpec,
    Setup,
    VerifyError,
    admissibility_check,
    aperture_scaling_study,
    comparability_study,
    member_label,
    refinement_study,
    theorem_ratio_sweep,
    weak_type_sweep,
)
from .weights import WeightError, parse_weight

COMMANDS = ("compute", "verify", "sweep", "refine")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config schema


@dataclass
class GridCfg:
    dim: int = 1
    halfwidth: float = 8.0
    m: int = 256


@dataclass
class KernelCfg:
    beta: float = 1.0
    size: int = 8
    seed: int = 0


@dataclass
class QuadCfg:
    gamma: float = 1.0
    lam: float = 4.0
    stride: int = 1
    ratio: float = 2.0**0.25


@dataclass
class WeightsCfg:
    w1: str = "kind=constant c=1.0"
    w2: str = "kind=constant c=1.0"


@dataclass
class HerzCfg:
    alpha: float = 0.25
    p: float = 1.0
    q: float = 2.0
    q1: float = 1.0
    q2: float = 1.0
    homogeneous: bool = True


@dataclass
class CorpusCfg:
    size: int = 20
    seed: int = 0
    inner: float = 0.125
    outer: float = 2.0
    min_scale: float = 0.25


@dataclass
class OperatorCfg:
    name: str = "S"
    weak: bool = False
    field: str = ""  # compute: one formula instead of the corpus, e.g. "annulus inner=1 outer=2"


@dataclass
class SweepCfg:
    study: str = "scaling"  # scaling | comparability
    j_max: int = 3
    q: float = 2.0
    q2: float = 1.0
    weight: str = "kind=constant c=1.0"
    members: int = 3
    dict_small: int = 4
    dict_large: int = 32


@dataclass
class RefineCfg:
    quantity: str = "lq_norm"  # lq_norm | herz_norm | operator_norm
    levels: int = 3
    member: int = 0


@dataclass
class RunCfg:
    output: str = "out"
    threads: int = field(default_factory=lambda: max(1, int(os.environ.get("SQFN_LAB_THREADS", "1"))))
    memory_budget: float = 1e8
    explore: bool = False
    refine_check: bool = True


SECTIONS = {
    "grid": GridCfg,
    "kernel": KernelCfg,
    "quad": QuadCfg,
    "weights": WeightsCfg,
    "herz": HerzCfg,
    "corpus": CorpusCfg,
    "operator": OperatorCfg,
    "sweep": SweepCfg,
    "refine": RefineCfg,
    "run": RunCfg,
}


@dataclass
class RunConfig:
    command: str = "verify"
    grid: GridCfg = field(default_factory=GridCfg)
    kernel: KernelCfg = field(default_factory=KernelCfg)
    quad: QuadCfg = field(default_factory=QuadCfg)
    weights: WeightsCfg = field(default_factory=WeightsCfg)
    herz: HerzCfg = field(default_factory=HerzCfg)
    corpus: CorpusCfg = field(default_factory=CorpusCfg)
    operator: OperatorCfg = field(default_factory=OperatorCfg)
    sweep: SweepCfg = field(default_factory=SweepCfg)
    refine: RefineCfg = field(default_factory=RefineCfg)
    run: RunCfg = field(default_factory=RunCfg)

    def flat(self) -> dict:
        out = {}
        for sec in SECTIONS:
            for k, v in dataclasses.asdict(getattr(self, sec)).items():
                out[f"{sec}.{k}"] = v
        return out

    def set(self, key: str, raw, where: str) -> None:
        sec, _, name = key.partition(".")
        if sec not in SECTIONS or not name:
            raise ConfigError(f"{where}: unknown key {key!r}")
        obj = getattr(self, sec)
        names = {f.name: f for f in dataclasses.fields(obj)}
        if name not in names:
            raise ConfigError(f"{where}: unknown key {key!r} (section {sec!r} has {sorted(names)})")
        default = getattr(SECTIONS[sec](), name)
        setattr(obj, name, _convert(raw, type(default), key, where))

    @classmethod
    def from_flat(cls, command: str, values: dict) -> "RunConfig":
        cfg = cls(command=command)
        for k, v in values.items():
            cfg.set(k, v, "report")
        cfg.validate()
        return cfg

    # -- derived objects --------------------------------------------------

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {COMMANDS}")
        for key, check in (
            ("grid.m", self.grid.m >= 8 and self.grid.m % 2 == 0),
            ("grid.dim", self.grid.dim in (1, 2)),
            ("kernel.size", self.kernel.size >= 1),
            ("corpus.size", self.corpus.size >= 1),
            ("operator.name", self.operator.name in ("S", "G", "G*")),
            ("sweep.study", self.sweep.study in ("scaling", "comparability")),
            ("refine.quantity", self.refine.quantity in ("lq_norm", "herz_norm", "operator_norm")),
            ("refine.levels", self.refine.levels >= 2),
            ("run.threads", self.run.threads >= 1),
        ):
            if not check:
                raise ConfigError(f"invalid value for {key}: {self.flat()[key]!r}")
        self.herz_params()

    def herz_params(self) -> HerzParams:
        try:
            return HerzParams(
                self.herz.alpha,
                self.herz.p,
                self.herz.q,
                parse_weight(self.weights.w1),
                parse_weight(self.weights.w2),
                self.herz.q1,
                self.herz.q2,
                self.herz.homogeneous,
            )
        except (HerzError, WeightError) as exc:
            raise ConfigError(f"herz/weights: {exc}") from exc

    def setup(self, m: int | None = None) -> Setup:
        return Setup(
            self.grid.dim,
            self.grid.halfwidth,
            m or self.grid.m,
            self.kernel.beta,
            self.kernel.size,
            self.kernel.seed,
            self.quad.stride,
            self.quad.ratio,
            self.run.threads,
        )

    def corpus_spec(self, size: int | None = None) -> CorpusSpec:
        c = self.corpus
        return CorpusSpec(size or c.size, c.seed, self.grid.dim, c.inner, c.outer, c.min_scale)

    def op(self) -> OperatorSpec:
        lam = self.quad.lam if self.operator.name == "G*" else None
        return OperatorSpec(self.operator.name, self.quad.gamma, lam)


def _convert(raw, typ, key: str, where: str):
    if not isinstance(raw, str):
        if typ is float and isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return float(raw)
        if isinstance(raw, typ):
            return raw
        raise ConfigError(f"{where}: {key} expects {typ.__name__}, got {raw!r}")
    s = raw.strip()
    try:
        if typ is bool:
            if s.lower() in ("true", "yes", "1"):
                return True
            if s.lower() in ("false", "no", "0"):
                return False
            raise ValueError
        if typ is int:
            return int(s)
        if typ is float:
            return float(s)
        return s
    except ValueError:
        raise ConfigError(f"{where}: {key} expects {typ.__name__}, got {s!r}") from None


def parse_config(text: str, command: str, source: str = "<config>", overrides=()) -> RunConfig:
    cfg = RunConfig(command=command)
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, value = body.partition("=")
        cfg.set(key.strip(), value.strip(), f"{source}:{lineno}")
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"--set {ov!r}: expected key=value")
        key, _, value = ov.partition("=")
        cfg.set(key.strip(), value.strip(), f"--set {ov}")
    cfg.validate()
    return cfg


def load_config(path: str | Path, command: str, overrides=()) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, command, str(p), overrides)


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_report(report: dict, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n")
    return path


def _write_rows(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def emit_plotdata(report: dict, out: Path) -> list[Path]:
    """Long-format CSVs (one observation per row) for whatever the report holds."""
    out = Path(out) / "tables"
    paths = []
    for key, rr in sorted(report.get("ratio_reports", {}).items()):
        rows = [(m["id"], m["in_norm"], m["out_norm"], m["ratio"]) for m in rr["members"]]
        paths.append(_write_rows(out / f"ratios_{key}.csv", ["function", "in_norm", "out_norm", "ratio"], rows))
        long = [(m["id"], s, m[s]) for m in rr["members"] for s in ("in_norm", "out_norm", "ratio")]
        paths.append(_write_rows(out / f"plot_ratios_{key}.csv", ["function", "series", "value"], long))
    for i, sr in enumerate(report.get("scaling_reports", [])):
        js, norms = sr["js"], sr["norms"]
        lo = 1 if len(js) > 2 else 0
        rows = [(j, "norm", v) for j, v in zip(js, norms)]
        rows += [(j, "cap_line", norms[lo] * 2.0 ** (sr["cap"] * (j - lo))) for j in js]
        paths.append(_write_rows(out / f"scaling_{i:02d}.csv", ["j", "series", "value"], rows))
    if "comparability" in report:
        cr = report["comparability"]
        rows = [(m["id"], f"dict_{s}", e) for m in cr["members"] for s, e in zip(cr["sizes"], m["envelopes"])]
        paths.append(_write_rows(out / "comparability.csv", ["function", "series", "value"], rows))
    if "refinement" in report:
        rf = report["refinement"]
        rows = [(m, "value", v) for m, v in zip(rf["ms"], rf["values"])]
        rows += [(m, "delta", d) for m, d in zip(rf["ms"][1:], rf["deltas"])]
        paths.append(_write_rows(out / "refinement.csv", ["m", "series", "value"], rows))
    if "norms" in report:
        rows = [(r["id"], s, r[s]) for r in report["norms"] for s in ("in_norm", "out_norm")]
        paths.append(_write_rows(out / "norms.csv", ["function", "series", "value"], rows))
    return paths


def memory_estimate(cfg: RunConfig, m: int | None = None, functions: int | None = None) -> int:
    """Largest array the run allocates: A field (F, Y, T) or the (X, Y) cone matrix."""
    m = m or cfg.grid.m
    n = cfg.grid.dim
    size = m**n
    y = (m // cfg.quad.stride) ** n
    L = cfg.grid.halfwidth
    h = 2 * L / m
    t_count = int(math.floor(math.log(L / 2 / (2 * h)) / math.log(cfg.quad.ratio) + 1e-9)) + 1
    F = functions or 2 * cfg.corpus.size
    return max(F * y * t_count, size * y)


def _preflight(cfg: RunConfig, m: int, functions: int | None = None) -> None:
    est = memory_estimate(cfg, m, functions)
    if est > cfg.run.memory_budget:
        raise ConfigError(f"memory pre-flight: {est} values at m = {m} exceed run.memory_budget = {cfg.run.memory_budget:g}")


# ---------------------------------------------------------------------------
# commands


def _base_report(cfg: RunConfig) -> dict:
    # the thread count changes wall time only, so it stays out of the report
    flat = {k: v for k, v in cfg.flat().items() if k != "run.threads"}
    return {"command": cfg.command, "config": flat, "version": 1}


def _cmd_verify(cfg: RunConfig, out: Path) -> dict:
    _preflight(cfg, 2 * cfg.grid.m if cfg.run.refine_check else cfg.grid.m)
    hp = cfg.herz_params()
    sweep = weak_type_sweep if cfg.operator.weak else theorem_ratio_sweep
    rep = sweep(cfg.op(), hp, cfg.setup(), cfg.corpus_spec(), explore=cfg.run.explore, refine=cfg.run.refine_check)
    report = _base_report(cfg)
    report["ratio_reports"] = {"main": rep.to_dict()}
    report["status"] = rep.label
    return report


def _selected_inputs(cfg: RunConfig, grid) -> list[tuple[str, GridFunction]]:
    if cfg.operator.field:
        name, *parts = cfg.operator.field.split()
        params = {}
        for p in parts:
            k, _, v = p.partition("=")
            vals = [float(s) for s in v.split(",")]
            params[k] = vals[0] if len(vals) == 1 else tuple(vals)
        return [("field", sample(field_from_spec(name, **params), grid))]
    fs = sample_corpus(cfg.corpus_spec(), grid)
    return [(member_label(i), f) for i, f in enumerate(fs)]


def _cmd_compute(cfg: RunConfig, out: Path) -> dict:
    _preflight(cfg, cfg.grid.m, cfg.corpus.size)
    setup = cfg.setup()
    grid = setup.grid()
    hp = cfg.herz_params()
    verdict = admissibility_check(hp, grid.dim, cfg.operator.name, cfg.quad.lam)
    inputs = _selected_inputs(cfg, grid)
    fs = [f for _, f in inputs]
    af = a_beta_field(fs, setup.dictionary(), setup.quad(grid).lattice, threads=cfg.run.threads)
    op = cfg.op()
    vals = op.apply(af)
    annuli = Annuli.default(grid)
    in_n, _ = herz_norm_values(np.stack([f.values for f in fs]), grid, hp, annuli)
    out_n, tails = (weak_herz_values(vals, grid, hp, annuli), None) if cfg.operator.weak else herz_norm_values(vals, grid, hp, annuli)
    rows = []
    trunc = af.truncated_fraction()
    (out / "fields").mkdir(parents=True, exist_ok=True)
    for i, ((label, f), v) in enumerate(zip(inputs, vals)):
        write_csv(f, out / "fields" / f"{label}.csv")
        write_csv(GridFunction(grid, v, {"id": f"{op.label()}[{f.id}]"}), out / "fields" / f"{label}_{op.name.replace('*', 'star')}.csv")
        rows.append(
            {
                "id": label,
                "field": f.id,
                "in_norm": float(in_n[i]),
                "out_norm": float(out_n[i]),
                "output_tail": None if tails is None else tails[i].relative_bound,
                "truncated_fraction": float(trunc[i]),
            }
        )
    report = _base_report(cfg)
    report.update(
        {
            "operator": op.label(),
            "verdict": verdict.to_dict(),
            "grid": grid.spec(),
            "window": annuli.spec(),
            "dictionary": setup.dictionary().manifest(),
            "norms": rows,
            "status": "OK",
        }
    )
    return report


def _cmd_sweep(cfg: RunConfig, out: Path) -> dict:
    setup = cfg.setup()
    grid = setup.grid()
    report = _base_report(cfg)
    sw = cfg.sweep
    fs = sample_corpus(cfg.corpus_spec(), grid)[: sw.members]
    if sw.study == "scaling":
        _preflight(cfg, cfg.grid.m, 1)
        w = parse_weight(sw.weight)
        reps = [aperture_scaling_study(f, setup.dictionary(), sw.j_max, w, sw.q, sw.q2, setup.quad(grid)) for f in fs]
        report["scaling_reports"] = [r.to_dict() for r in reps]
        report["status"] = "PASS" if all(r.passed is not False for r in reps) else "FAIL"
    else:
        _preflight(cfg, cfg.grid.m, sw.members)
        big = setup.dictionary(sw.dict_large)
        rep = comparability_study(fs, big, setup.quad(grid), sizes=(sw.dict_small, sw.dict_large))
        report["comparability"] = rep.to_dict()
        report["status"] = "PASS" if rep.stable else "FAIL"
    return report


def _cmd_refine(cfg: RunConfig, out: Path) -> dict:
    levels = cfg.refine.levels
    top = cfg.grid.m * 2 ** (levels - 1)
    _preflight(cfg, top, 1)
    hp = cfg.herz_params()
    spec = cfg.corpus_spec(max(cfg.corpus.size, cfg.refine.member + 1))
    formula = corpus_fields(spec)[cfg.refine.member]
    k_window = Annuli.default(cfg.setup().grid())

    def compute(m: int) -> float:
        setup = cfg.setup(m)
        grid = setup.grid()
        f = sample(formula, grid)
        if cfg.refine.quantity == "lq_norm":
            return lq_norm_weighted(f, hp.q, hp.w2)
        annuli = Annuli(grid, k_window.k_min, k_window.k_max)
        if cfg.refine.quantity == "herz_norm":
            return float(herz_norm_values(f.values[None], grid, hp, annuli)[0][0])
        af = a_beta_field(f, setup.dictionary(), setup.quad(grid).lattice, threads=cfg.run.threads)
        return float(herz_norm_values(cfg.op().apply(af), grid, hp, annuli)[0][0])

    rep = refinement_study(compute, cfg.grid.m, levels)
    report = _base_report(cfg)
    report["refinement"] = rep.to_dict()
    report["function"] = formula.id
    report["status"] = "non-Cauchy" if rep.non_cauchy else "OK"
    return report


HANDLERS = {"compute": _cmd_compute, "verify": _cmd_verify, "sweep": _cmd_sweep, "refine": _cmd_refine}


def run(command: str, config_path: str | Path, overrides=()) -> tuple[int, dict | None]:
    cfg = load_config(config_path, command, overrides)
    out = Path(cfg.run.output)
    if not out.is_absolute():
        out = Path(config_path).resolve().parent / out
    report = HANDLERS[command](cfg, out)
    write_report(report, out)
    emit_plotdata(report, out)
    return 0, report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sqfn-lab", description="Intrinsic square functions on weighted Herz spaces.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="flat key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    args = parser.parse_args(argv)
    try:
        code, report = run(args.command, args.config, args.set)
    except InadmissibleError as exc:
        print(f"sqfn-lab: refused: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, GridError, HerzError, KernelError, QuadratureError, VerifyError, WeightError, ValueError, OSError) as exc:
        print(f"sqfn-lab: error: {exc}", file=sys.stderr)
        return 1
    print(f"{args.command}: {report.get('status', 'OK')}")
    return code


if __name__ == "__main__":
    sys.exit(main())
