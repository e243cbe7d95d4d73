from __future__ import annotations

import argparse
from typing import Sequence

from .cli_analyze import add_analyze_subparser
from .cli_run import add_run_subparser
from .config import configure_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trustfabric")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (repeatable).")
    subparsers = parser.add_subparsers(dest="command", required=True)

    add_run_subparser(subparsers)
    add_analyze_subparser(subparsers)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, getattr(args, "quiet", False))

    if hasattr(args, "func"):
        return args.func(args)

    return 1


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
