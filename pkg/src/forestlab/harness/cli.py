"""Batch command line interface.

    forestlab run    [--config FILE] [--<field> VALUE ...]
    forestlab table  PRESET [--W N] [--B N] [--test-size N] [--master-seed S] [--workers K]
    forestlab sweep  --kind {irrelevant,rho} --grid V1,V2,... [--config FILE] [--<field> VALUE ...]
    forestlab figure --covariate K --bins N [--config FILE] [--<field> VALUE ...]

Results go to ``--output`` (or stdout) in ``--format`` csv, json or
markdown; figure data is always CSV.  Exit status is 0 on success, 1 on
invalid input and 2 on runtime or numerical failures.  The worker count
can also be set through the FORESTLAB_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import logging
import sys

from forestlab.errors import InputError, NumericError
from forestlab.harness import config as cfg
from forestlab.harness.experiment import execute, figure_bins, run_sweep
from forestlab.harness.output import figure_to_csv, render_rows
from forestlab.harness.presets import PRESET_NAMES, preset_configs

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_config_flags(parser, exclude=()):
    parser.add_argument("--config", help="key = value config file")
    for name in cfg._FIELD_TYPES:
        if name not in exclude:
            parser.add_argument(_flag(name), dest=name, default=None, metavar="VALUE")


def _collect(args, names) -> dict:
    values = {}
    for name in names:
        raw = getattr(args, name, None)
        if raw is not None:
            values[name] = cfg.coerce_field(name, raw)
    return values


def _config_from_args(args) -> cfg.ExperimentConfig:
    values = _collect(args, cfg._FIELD_TYPES)
    if args.config:
        return cfg.load_config(args.config, **values)
    return cfg.ExperimentConfig(**values)


def _emit(text: str, output: str | None):
    if output:
        with open(output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_grid(raw: str, kind: str) -> list:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise InputError("grid: must contain at least one value")
    try:
        return [int(s) for s in items] if kind == "irrelevant" else [float(s) for s in items]
    except ValueError:
        raise InputError(f"grid: cannot parse {raw!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="forestlab", description="Bagging versus random forest experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a single experiment")
    _add_config_flags(run)

    table = sub.add_parser("table", help="run every column of a table preset")
    table.add_argument("preset", help=f"one of: {', '.join(PRESET_NAMES)}")
    for name in ("W", "B", "test_size", "master_seed", "workers", "min_node_size", "output", "format"):
        table.add_argument(_flag(name), dest=name, default=None, metavar="VALUE")

    sweep = sub.add_parser("sweep", help="sweep irrelevant covariates or correlation")
    sweep.add_argument("--kind", required=True, choices=("irrelevant", "rho"))
    sweep.add_argument("--grid", required=True, help="comma-separated values")
    _add_config_flags(sweep)

    fig = sub.add_parser("figure", help="binned conditional differences along one covariate")
    fig.add_argument("--covariate", required=True, type=int, help="1-based covariate index")
    fig.add_argument("--bins", required=True, type=int)
    _add_config_flags(fig)
    return parser


def _main(argv) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    if args.command == "run":
        config = _config_from_args(args)
        _emit(render_rows([execute(config).row], config.format), config.output)
    elif args.command == "table":
        overrides = _collect(args, ("W", "B", "test_size", "master_seed", "workers", "min_node_size"))
        fmt = args.format or "csv"
        if fmt not in cfg.OUTPUT_FORMATS:
            raise InputError(f"format: expected one of {cfg.OUTPUT_FORMATS}, got {fmt!r}")
        configs = preset_configs(args.preset, **overrides)
        rows = [execute(c).row for c in configs]
        _emit(render_rows(rows, fmt), args.output)
    elif args.command == "sweep":
        base = _config_from_args(args)
        result = run_sweep(args.kind, base, _parse_grid(args.grid, args.kind))
        _emit(render_rows(result.rows, base.format), base.output)
    elif args.command == "figure":
        config = _config_from_args(args)
        table = figure_bins(execute(config), args.covariate, args.bins)
        _emit(figure_to_csv(table), config.output)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return _main(argv)
    except InputError as exc:
        print(f"forestlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, ArithmeticError, RuntimeError, MemoryError, OSError) as exc:
        print(f"forestlab: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
