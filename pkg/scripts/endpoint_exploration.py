"""Ratios of S_beta just past the endpoint, recorded but never labeled PASS.

For n = 1, q = 2, q1 = q2 = 1 and w = 1 the admissible range is
-1/2 < alpha < 1/2 with the weak-type endpoint at alpha = 1/2.  This script
runs strong sweeps (explore mode) for alphas on both sides and prints the
corpus max ratio at each resolution next to the admissibility verdict.
"""
from __future__ import annotations

import argparse
import json
from dataclasses import asdict, dataclass, field

from sqfn_lab import CorpusSpec, HerzParams, OperatorSpec, Setup, theorem_ratio_sweep


@dataclass
class ExplorationConfig:
    alphas: list[float] = field(default_factory=lambda: [0.25, 0.45, 0.5, 0.6, 0.75, 1.0])
    ms: list[int] = field(default_factory=lambda: [128, 256, 512])
    corpus_size: int = 20
    dict_size: int = 8
    p: float = 1.0
    q: float = 2.0
    json_out: str = ""


def parse_args(argv=None) -> ExplorationConfig:
    d = ExplorationConfig()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=d.alphas)
    ap.add_argument("--ms", type=int, nargs="+", default=d.ms)
    ap.add_argument("--corpus-size", type=int, default=d.corpus_size)
    ap.add_argument("--dict-size", type=int, default=d.dict_size)
    ap.add_argument("--json-out", default=d.json_out)
    a = ap.parse_args(argv)
    return ExplorationConfig(a.alphas, a.ms, a.corpus_size, a.dict_size, json_out=a.json_out)


def explore(cfg: ExplorationConfig) -> list[dict]:
    rows = []
    for alpha in cfg.alphas:
        hp = HerzParams(alpha, cfg.p, cfg.q)
        ratios, label, case = [], "", ""
        for m in cfg.ms:
            setup = Setup(m=m, dict_size=cfg.dict_size)
            r = theorem_ratio_sweep(OperatorSpec("S"), hp, setup, CorpusSpec(cfg.corpus_size), explore=True, refine=False)
            ratios.append(r.max_ratio)
            case = r.verdict.case
            label = r.label if label in ("", r.label) else "mixed"
        rows.append({"alpha": alpha, "case": case, "label": label, "max_ratio": dict(zip(cfg.ms, ratios))})
    return rows


def main(argv=None) -> None:
    cfg = parse_args(argv)
    rows = explore(cfg)
    head = "alpha   case               " + "".join(f"m={m:<9d}" for m in cfg.ms)
    print(head)
    for r in rows:
        cells = "".join(f"{v:<11.4g}" for v in r["max_ratio"].values())
        print(f"{r['alpha']:<7g} {r['case']:<18s} {cells}")
    if cfg.json_out:
        with open(cfg.json_out, "w") as fh:
            json.dump({"config": asdict(cfg), "rows": rows}, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
