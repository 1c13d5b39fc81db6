"""Command line entry point ``nmh``."""

from __future__ import annotations

import argparse
import json
import sys

from .discrete_walk import InvalidChainError, classify, read_birth_death_csv
from .experiments import RUN_PRESETS, ConfigError, resolve_config, run_experiment
from .presets import DISCRETE_PRESETS, PANEL_ALIASES, discrete_preset
from .verify import VERIFIERS, run_verify


def _cmd_run(args) -> int:
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    try:
        cfg = resolve_config(cfg, args.preset)
        if args.seed is not None:
            cfg["seeds"] = [args.seed]
        if args.iterations is not None:
            cfg["iterations"] = args.iterations
        report = run_experiment(cfg, args.out, workers=args.workers, gnuplot=args.gnuplot)
    except ConfigError as exc:
        print(f"nmh run: {exc}", file=sys.stderr)
        return 2
    for row in report["summary"]:
        print(json.dumps(row, sort_keys=True))
    for N, cls in report.get("classification", {}).items():
        print(f"N={N}: {cls['verdict']}")
    print(f"outputs written to {args.out}")
    return 0


def _cmd_classify(args) -> int:
    try:
        if args.csv:
            chain = read_birth_death_csv(args.csv)
        elif args.preset:
            chain = discrete_preset(args.preset).birth_death(args.N)
        else:
            print("nmh classify: give --preset or --csv", file=sys.stderr)
            return 2
        result = classify(chain, M=args.M, tol=args.tol)
    except (KeyError, InvalidChainError, ValueError) as exc:
        print(f"nmh classify: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result.to_json(), indent=2) if args.json else result.verdict)
    return 0


def _cmd_verify(args) -> int:
    try:
        res = run_verify(args.id, seed=args.seed)
    except KeyError as exc:
        print(f"nmh verify: {exc.args[0]}", file=sys.stderr)
        return 2
    print(f"{'PASS' if res.passed else 'FAIL'} {res.id}: {res.summary}")
    if args.json:
        print(json.dumps(res.to_json(), indent=2))
    return 0 if res.passed else 1


def _cmd_list(args) -> int:
    print("run presets:")
    for name in sorted(RUN_PRESETS):
        print(f"  {name}")
    print("classify presets:")
    for name, p in sorted(DISCRETE_PRESETS.items()):
        print(f"  {name:18s} {p.description}")
    for alias, name in sorted(PANEL_ALIASES.items()):
        print(f"  {alias:18s} alias of {name}")
    print("verify ids:")
    for vid in VERIFIERS:
        print(f"  {vid}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmh", description="Noisy and pseudo-marginal MH experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run chains from a preset or JSON config (or a manifest)")
    run.add_argument("--config")
    run.add_argument("--preset")
    run.add_argument("--out", default="nmh-out")
    run.add_argument("--seed", type=int)
    run.add_argument("--iterations", type=int)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--gnuplot", action="store_true", help="also write a plots.gp script")
    run.set_defaults(func=_cmd_run)

    cl = sub.add_parser("classify", help="classify a birth-death chain")
    cl.add_argument("--preset")
    cl.add_argument("--csv")
    cl.add_argument("--N", type=int, default=None)
    cl.add_argument("--M", type=int, default=30_000)
    cl.add_argument("--tol", type=float, default=1e-12)
    cl.add_argument("--json", action="store_true")
    cl.set_defaults(func=_cmd_classify)

    ve = sub.add_parser("verify", help="check one named claim")
    ve.add_argument("id")
    ve.add_argument("--seed", type=int, default=7)
    ve.add_argument("--json", action="store_true")
    ve.set_defaults(func=_cmd_verify)

    ls = sub.add_parser("list-presets", help="list presets and verify ids")
    ls.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run" and not (args.config or args.preset):
        print("nmh run: give --config or --preset", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
