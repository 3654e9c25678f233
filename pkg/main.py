#!/usr/bin/env python3
"""
liftemp - lifted versus reversible tempering experiments

Commands:
  volatility  check the lifted-chain volatility formula by simulation
  optimal     optimal spacing, acceptance and efficiency of both dynamics
  curves      efficiency-vs-acceptance CSV and plot script
  run         one simulated tempering ladder
  sweep       round-trip rates over an acceptance grid
  oracle      exact round-trip rates over the same grid
  fit         fit the efficiency curves to a sweep CSV
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

import harness
from sim_data.models import ChainParams, Mode, SweepConfig
from storage import ConfigManager

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = Path(__file__).parent / "config" / "config.json"
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(ValueError):
    """Raised by the argument parser instead of exiting."""


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises, so usage errors share the JSON error line."""

    def error(self, message):
        raise UsageError(message)


def _common(parser: argparse.ArgumentParser, *, seed=True, out=True):
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging and progress bars")
    if seed:
        parser.add_argument("--seed", type=int, default=None)
    if out:
        parser.add_argument("--out", type=Path, default=None, help="output CSV path")


def _sweep_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--d", type=int, default=None, help="dimension of the Gaussian target")
    parser.add_argument("--beta-min", dest="beta_min", type=float, default=None)
    parser.add_argument("--iters", dest="iterations", type=int, default=None, help="iterations per point")
    parser.add_argument("--mode", choices=("rev", "nonrev", "both"), default=None)
    parser.add_argument("--grid", default=None, help="point count or comma-separated acceptances")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (env: LIFTEMP_WORKERS)")


def build_parser() -> CommandParser:
    parser = CommandParser(prog="liftemp", description="Lifted versus reversible tempering experiments")
    commands = parser.add_subparsers(dest="command", parser_class=CommandParser)
    commands.required = True

    volatility = commands.add_parser("volatility", help="check v = (A-B)^2/C + (A+B)")
    _common(volatility, out=False)
    volatility.add_argument("--A", type=float, default=None)
    volatility.add_argument("--B", type=float, default=None)
    volatility.add_argument("--C", type=float, default=None)
    volatility.add_argument("--steps", type=int, default=None)
    volatility.add_argument("--replicates", type=int, default=None)
    volatility.add_argument("--method", choices=harness.VOLATILITY_METHODS, default=None,
                            help="endpoint averages or regenerative blocks")
    volatility.add_argument("--blocks", type=int, default=None, help="blocks for --method regenerative")
    volatility.add_argument("--profile", default=None, help="comma-separated times in (0, 1]")

    optimal = commands.add_parser("optimal", help="optimal scaling constants")
    _common(optimal, seed=False, out=False)
    optimal.add_argument("--c", type=float, default=None)

    curves = commands.add_parser("curves", help="efficiency curves CSV")
    _common(curves, seed=False)
    curves.add_argument("--c", type=float, default=None)
    curves.add_argument("--grid", dest="grid_size", type=int, default=None, help="number of acceptance points")

    run = commands.add_parser("run", help="simulate one ladder")
    _common(run, out=False)
    run.add_argument("--d", type=int, default=None)
    run.add_argument("--beta-min", dest="beta_min", type=float, default=None)
    run.add_argument("--iters", dest="iterations", type=int, default=None)
    run.add_argument("--mode", choices=("rev", "nonrev"), default=None)
    run.add_argument("--acc", type=float, required=True, help="target acceptance of the ladder")

    for name, text in (("sweep", "simulated round-trip rates"), ("oracle", "exact round-trip rates")):
        sub = commands.add_parser(name, help=text)
        _common(sub)
        _sweep_flags(sub)

    fit = commands.add_parser("fit", help="fit efficiency curves to a sweep CSV")
    _common(fit, seed=False)
    fit.add_argument("csv", type=Path, help="sweep or oracle CSV")
    fit.add_argument("--c-effective", dest="c_effective", default=None,
                     help="'fit', a positive number, or omitted for the ladder-midpoint value")
    return parser


def _sweep_config(values: dict) -> SweepConfig:
    return SweepConfig(
        d=int(values["d"]),
        beta_min=float(values["beta_min"]),
        acceptance_grid=harness.parse_grid(values.get("grid")),
        iterations_per_point=int(values["iterations"]),
        modes=harness.parse_modes(values["mode"]),
        seed=int(values["seed"]),
        output_path=str(values["out"] or f"{values['command']}.csv"),
    )


def dispatch(args: argparse.Namespace) -> int:
    """Run the selected command with config values under the flags."""
    config_file = args.config or DEFAULT_CONFIG
    config = ConfigManager(config_file, required=args.config is not None)
    values = config.merged(vars(args))

    if args.command == "volatility":
        params = ChainParams(A=float(values["A"]), B=float(values["B"]), C=float(values["C"]))
        harness.cmd_volatility(params, int(values["steps"]), int(values["replicates"]), int(values["seed"]),
                               method=values["method"], blocks=int(values["blocks"]),
                               profile_times=harness.parse_times(values.get("profile")))
    elif args.command == "optimal":
        harness.cmd_optimal(float(values["c"]))
    elif args.command == "curves":
        harness.cmd_curves(float(values["c"]), int(values["grid_size"]), Path(values["out"] or "curves.csv"))
    elif args.command == "run":
        mode = values["mode"] if values["mode"] in ("rev", "nonrev") else "nonrev"
        harness.cmd_run(int(values["d"]), float(values["beta_min"]), float(values["acc"]),
                        Mode.parse(mode), int(values["iterations"]), int(values["seed"]))
    elif args.command in ("sweep", "oracle"):
        sweep = _sweep_config(values)
        workers = harness.resolve_workers(args.workers, config.get("workers"))
        command = harness.cmd_sweep if args.command == "sweep" else harness.cmd_oracle
        command(sweep, workers=workers, progress=args.verbose)
    elif args.command == "fit":
        harness.cmd_fit(args.csv, values.get("c_effective"), values["out"])
    return 0


def _report_error(command: Optional[str], error: Exception):
    payload = {"success": False, "command": command, "error": str(error)}
    print(json.dumps(payload), file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        _report_error(None, e)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        return dispatch(args)
    except ValueError as e:
        logger.debug("validation error", exc_info=True)
        _report_error(args.command, e)
        return EXIT_USAGE
    except Exception as e:
        logger.debug("command failed", exc_info=True)
        _report_error(args.command, e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
