#!/usr/bin/env python3
"""
cli_analyze.py - `analyze` subcommand: static policy analysis.

Console script name:
    trustfabric-analyze
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .analyze import analyze
from .config import configure_logging
from .engine import load_scenario
from .errors import ScenarioError, TcuError


def _add_analyze_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "scenario",
        help="Scenario file whose policy set is analysed.",
    )


def add_analyze_subparser(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "analyze",
        help="List allowed regions, shadowed APU entries and dead DPU entries.",
    )
    _add_analyze_arguments(parser)
    parser.set_defaults(func=_run_analyze)


def _run_analyze(args: argparse.Namespace) -> int:
    try:
        analysis = analyze(load_scenario(args.scenario))
    except (ScenarioError, TcuError, OSError) as exc:
        print(f"error: {args.scenario}: {exc}", file=sys.stderr)
        return 2

    sys.stdout.write(analysis.render())
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="trustfabric-analyze",
        description="Static analysis of a scenario's APU/DPU policies.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable).")
    _add_analyze_arguments(parser)

    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    return _run_analyze(args)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
