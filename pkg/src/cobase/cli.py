"""Command line interface.

Subcommands::

    cobase generate --out DIR [--config FILE] [--seed SEED]
    cobase run      --out DIR [--config FILE] [--seed SEED] [--methods A,B] [--n N]
                    [--window-days W] [--vs-p P]
    cobase scores   --out DIR

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .datasets import write_synthetic
from .exceptions import ConfigError, DataError, InvariantViolation
from .experiment import (
    config_from_mapping,
    emit_outputs,
    load_config,
    load_results,
    run_experiment,
    write_scores,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4


def _config(args):
    overrides = {
        "base_seed": args.seed,
        "methods": getattr(args, "methods", None),
        "n": getattr(args, "n", None),
        "window_days": getattr(args, "window_days", None),
        "vs_p": getattr(args, "vs_p", None),
    }
    if args.config:
        return load_config(args.config, **overrides)
    return config_from_mapping({}, **overrides)


def cmd_generate(args):
    config = _config(args)
    if config.synthetic is None:
        raise ConfigError("generate needs a synthetic configuration, not archive paths")
    synthetic = config.synthetic
    if args.seed is not None:
        synthetic = dataclasses.replace(synthetic, seed=args.seed)
    paths = write_synthetic(synthetic, args.out)
    for path in paths.values():
        print(path)


def cmd_run(args):
    config = _config(args)
    table = run_experiment(config)
    paths = emit_outputs(table, args.out, config)
    print("# " + "dm.csv: positive dm_statistic means the method scores worse than the baseline")
    for path in paths.values():
        print(path)


def cmd_scores(args):
    table = load_results(args.out)
    write_scores(table, args.out)
    print(f"{args.out}/scores.csv")
    print(f"{args.out}/dm.csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="cobase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic forecast/observation archive")
    run = sub.add_parser("run", help="run the postprocessing experiment")
    sco = sub.add_parser("scores", help="re-aggregate per_date.csv in an output directory")
    for p in (gen, run, sco):
        p.add_argument("--out", required=True, help="output directory")
    for p in (gen, run):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--seed", type=int, help="base seed (synthetic seed for generate)")
    run.add_argument("--methods", help="comma separated method labels")
    run.add_argument("--n", type=int, help="postprocessed ensemble size N")
    run.add_argument("--window-days", type=int, help="training window length (default 30)")
    run.add_argument("--vs-p", type=float, help="variogram score order (default 1)")
    gen.set_defaults(func=cmd_generate)
    run.set_defaults(func=cmd_run)
    sco.set_defaults(func=cmd_scores)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
