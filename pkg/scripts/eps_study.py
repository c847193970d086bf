#!/usr/bin/env python3
"""Coupled solves along a decreasing eps ladder (flagship data by default).

    python scripts/eps_study.py [--out results/eps_study] [--ladder 1e-1,1e-2,1e-3]
"""

import argparse
import dataclasses
from pathlib import Path

from stefan_control.cli import dispatch
from stefan_control.config import EpsStudySpec, config_from_dict, load_config

from run_flagship import FLAGSHIP


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/eps_study"))
    ap.add_argument("--config", type=Path, default=None)
    ap.add_argument("--ladder", default=None, help="comma-separated, strictly decreasing")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else config_from_dict(FLAGSHIP)
    if args.ladder:
        ladder = tuple(float(x) for x in args.ladder.split(","))
        cfg = dataclasses.replace(cfg, eps_study=EpsStudySpec(ladder))
    code, out = dispatch("eps-study", cfg, args.out)
    print(f"eps-study: exit {code}, bundle at {out}")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
