"""Run every figure study with its default configuration and print the summaries.

Usage: python scripts/reproduce_all.py [--out runs/reproduce] [--only fig3,fig8]
"""
from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from fourier_qae.harness import ALIASES, EXPERIMENTS, ExperimentConfig, run_experiment


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("runs/reproduce"))
    p.add_argument("--only", default="", help="comma-separated experiment names or short aliases")
    args = p.parse_args(argv)
    names = [ALIASES.get(n, n) for n in args.only.split(",") if n] or [e for e in EXPERIMENTS if e != "custom"]
    for name in names:
        t0 = time.perf_counter()
        man = run_experiment(ExperimentConfig(name, output_dir=str(args.out / name)))
        print(f"{name} ({time.perf_counter() - t0:.1f} s)")
        print(json.dumps(man.summary, indent=2, default=float))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
