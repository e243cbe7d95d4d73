#!/usr/bin/env python3
"""
cli_run.py - `run` subcommand: simulate scenario files.

Console script name:
    trustfabric-run
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import configure_logging
from .engine import SimulationJob, SimulationResult, run_jobs
from .trace import render_trace


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "scenarios",
        nargs="+",
        help="Scenario file(s) to simulate.",
    )
    parser.add_argument(
        "--trace",
        help="Write the trace here. With several scenarios this is a directory "
        "receiving <name>.trace per scenario.",
    )
    parser.add_argument(
        "--limit",
        type=int,
        help="Cycle limit (overrides the scenario's LIMIT).",
    )
    parser.add_argument(
        "--quiet",
        action="store_true",
        help="Do not echo the trace to stdout; only errors are logged.",
    )
    parser.add_argument(
        "-j",
        "--jobs",
        type=int,
        default=1,
        help="Simulate up to this many scenarios in parallel (default: 1).",
    )


def add_run_subparser(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "run",
        help="Simulate scenario files and report blocked transactions.",
    )
    _add_run_arguments(parser)
    parser.set_defaults(func=_run)


def _trace_path(args: argparse.Namespace, scenario: Path) -> Optional[Path]:
    if not args.trace:
        return None
    if len(args.scenarios) == 1:
        return Path(args.trace)
    return Path(args.trace) / f"{scenario.stem}.trace"


def _run(args: argparse.Namespace) -> int:
    if args.limit is not None and args.limit <= 0:
        print("error: --limit must be positive", file=sys.stderr)
        return 2

    jobs = [
        SimulationJob(Path(s), trace_path=_trace_path(args, Path(s)), limit=args.limit)
        for s in args.scenarios
    ]

    rc = 0
    for job, result in zip(jobs, run_jobs(jobs, workers=args.jobs)):
        if not isinstance(result, SimulationResult):
            print(f"error: {job.scenario_path}: {result}", file=sys.stderr)
            rc = max(rc, 2)
            continue
        if job.trace_path is None and not args.quiet:
            sys.stdout.write(render_trace(result.events))
        sys.stdout.write(result.report.render())
        rc = max(rc, result.report.exit_code)
    return rc


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="trustfabric-run",
        description="Simulate scenario files on the trusted bus fabric.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable).")
    _add_run_arguments(parser)

    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    return _run(args)


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
