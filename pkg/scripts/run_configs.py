"""Run every shipped config through the CLI and print one status line each.

The command is taken from the file-name prefix (verify_, sweep_, compute_,
refine_).  Usage: python scripts/run_configs.py [--configs DIR] [--only PREFIX]
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from sqfn_lab.cli import COMMANDS, main


@dataclass
class RunAllConfig:
    configs: Path = Path(__file__).resolve().parent.parent / "configs"
    only: str = ""


def parse_args(argv=None) -> RunAllConfig:
    d = RunAllConfig()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", type=Path, default=d.configs)
    ap.add_argument("--only", default=d.only, help="run only files starting with this prefix")
    a = ap.parse_args(argv)
    return RunAllConfig(a.configs, a.only)


def run_all(cfg: RunAllConfig) -> int:
    worst = 0
    for path in sorted(cfg.configs.glob("*.cfg")):
        if cfg.only and not path.name.startswith(cfg.only):
            continue
        command = path.stem.split("_", 1)[0]
        if command not in COMMANDS:
            print(f"skip {path.name}: no command prefix")
            continue
        t0 = time.perf_counter()
        code = main([command, "--config", str(path)])
        print(f"  {path.name}: exit {code} ({time.perf_counter() - t0:.1f} s)")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run_all(parse_args()))
