"""Command-line entry point: ``granular-jko run <scenario-file> [options]``.

Exit codes: 0 when every scenario reaches its horizon, 2 when at least one
stopped early on a blow-up trigger (a successful detection), 1 on error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys

from .scenarios import load_scenarios, run_scenario

__all__ = ["main", "build_parser", "parse_overrides"]

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP = 0, 1, 2


def parse_overrides(items) -> dict:
    """Turn ``["key=value", ...]`` into a dict, rejecting malformed items."""
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"override {item!r} is not key=value")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="granular-jko", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every scenario in an INI file")
    run.add_argument("scenario_file")
    run.add_argument("--out", default=None, help="output directory (default: runs/)")
    run.add_argument("--stride", type=int, default=None, help="snapshot stride; 0 disables snapshots")
    run.add_argument("--dry-run", action="store_true", help="echo the parsed configs and exit")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                     help="override a key in every scenario (repeatable)")
    run.add_argument("--only", action="append", default=[], metavar="NAME",
                     help="restrict to the named scenario(s)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.stride is not None and args.stride < 0:
            raise ValueError("--stride must be nonnegative")
        scenarios = load_scenarios(args.scenario_file, parse_overrides(args.override))
        if args.only:
            missing = set(args.only) - {s.name for s in scenarios}
            if missing:
                raise KeyError(f"no scenario named {sorted(missing)}")
            scenarios = [s for s in scenarios if s.name in args.only]
        names = [s.name for s in scenarios]
        if len(set(names)) != len(names):
            raise ValueError("scenario names must be unique")
        blew_up = False
        for sc in scenarios:
            summary = run_scenario(sc, out_dir=args.out, stride=args.stride, dry_run=args.dry_run)
            print(json.dumps(summary, sort_keys=True) if args.dry_run else _one_line(summary))
            blew_up |= bool(summary.get("blew_up", False))
    except (OSError, ValueError, KeyError, TypeError, configparser.Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_BLOWUP if blew_up else EXIT_OK


def _one_line(summary: dict) -> str:
    parts = [summary["name"]]
    for key in ("T_b", "T", "trigger", "B_x", "B_v", "acceptance"):
        if key in summary and summary[key] is not None:
            parts.append(f"{key}={summary[key]}")
    return " ".join(parts)


if __name__ == "__main__":
    sys.exit(main())
