"""Command-line entry point.

    vanetsim run --preset small --protocol acr --out results.csv \
                 --seed 7 --reps 30 [--scenario scenario.txt]

Runs the selected protocol once per speed class (slow, med, fast) and
writes one CSV row per (protocol, speed class, metric). Precedence:
preset defaults, then the scenario file, then explicit flags. Exits
nonzero on configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_scenario, preset
from .harness import emit_csv, run_speed_sweep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vanetsim")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment and write a CSV")
    run.add_argument("--scenario", help="flat key=value scenario file")
    run.add_argument("--protocol", choices=("acr", "aodv", "dsdv"))
    run.add_argument("--preset", choices=("paper", "small"), default="small")
    run.add_argument("--out", required=True, help="output CSV path")
    run.add_argument("--seed", type=int, help="base seed (repetition i adds i)")
    run.add_argument("--reps", type=int, help="repetition count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = preset(args.preset)
        if args.scenario:
            cfg = load_scenario(args.scenario, cfg)
        overrides = {}
        if args.protocol:
            overrides["protocol"] = args.protocol
        if args.seed is not None:
            overrides["base_seed"] = args.seed
        if args.reps is not None:
            overrides["repetitions"] = args.reps
        if overrides:
            cfg = cfg.with_overrides(**overrides)
        cfg.validate()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows, _ = run_speed_sweep(cfg)
    try:
        emit_csv(rows, args.out, cfg)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
