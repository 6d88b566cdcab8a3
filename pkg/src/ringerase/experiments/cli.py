"""Command-line driver: ``ringerase {store,squeeze,sweep,compare}``.

Exit status: 0 success, 1 configuration error, 2 validation gate failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .commands import cmd_compare, cmd_squeeze, cmd_store, cmd_sweep, failing_rows, provenance
from .spec import PRESETS, ConfigError, ExperimentSpec, dump_spec, preset, read_spec

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_GATE = 2

DEFAULT_PRESET = {
    "store": "store-coherent",
    "squeeze": "generate",
    "sweep": "generate",
    "compare": "crosscheck",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ringerase", description="Ring-cavity quantum-erasing experiments: analytic curves and Monte Carlo checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "store": "storage fidelity against cycle count",
        "squeeze": "generated squeezing and target fidelity against cycle count",
        "sweep": "cycle-count thresholds over a parameter grid",
        "compare": "Monte Carlo versus analytic moments, gated at |z| < 3",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="PATH", help="YAML experiment file")
        src.add_argument("--preset", choices=sorted(PRESETS),
                         help=f"built-in experiment (default {DEFAULT_PRESET[name]})")
        p.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
        p.add_argument("--seed", type=int, help="master seed for the Monte Carlo")
        p.add_argument("--trajectories", type=int, metavar="N", help="Monte Carlo trajectories")
        p.add_argument("--workers", type=int, default=None, help="threads for trajectory groups")
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved experiment as YAML and exit")
        if name != "compare":
            p.add_argument("--no-mc", action="store_true", help="analytic columns only")
        else:
            p.add_argument("--corrupt-weight", type=float, default=1.0, metavar="FACTOR",
                           help="scale the feed-forward weights (debug: the gate should fail)")
    return parser


def resolve_spec(args) -> ExperimentSpec:
    spec = read_spec(args.config) if args.config else preset(args.preset or DEFAULT_PRESET[args.command])
    spec = spec.with_mc(trajectories=args.trajectories, seed=args.seed)
    if getattr(args, "no_mc", False):
        spec = spec.with_mc(trajectories=0)
    if args.out:
        spec = dataclasses.replace(spec, output=args.out)
    return spec.validate()


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = resolve_spec(args)
        if args.print_config:
            sys.stdout.write(dump_spec(spec))
            return EXIT_OK
        if args.command == "store":
            table = cmd_store(spec, args.workers)
        elif args.command == "squeeze":
            table = cmd_squeeze(spec, args.workers)
        elif args.command == "sweep":
            table = cmd_sweep(spec)
        else:
            table = cmd_compare(spec, args.corrupt_weight, args.workers)
    except ConfigError as exc:
        print(f"ringerase: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    text = table.to_csv(provenance(args.command, spec))
    if spec.output:
        with open(spec.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    if args.command == "compare":
        bad = failing_rows(table)
        if bad:
            cols = table.columns
            for row in bad:
                r = dict(zip(cols, row))
                print(
                    f"ringerase: gate failed: {r['scenario']} {r['strategy']} N={r['N']} "
                    f"{r['moment']} z={r['z']:.3g}",
                    file=sys.stderr,
                )
            return EXIT_GATE
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
