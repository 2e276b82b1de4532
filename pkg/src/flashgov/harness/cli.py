"""Command line entry point.

    flashgov run <scenario>... [--out FILE] [--workers N] [--no-timing]
    flashgov sweep <scenario>... [--out FILE] [--workers N] [--no-timing]
    flashgov validate <scenario>...

Exit status: 0 on success, 1 for parse/validation failures, 2 when a scenario
fails while running.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .report import format_csv
from .runner import ScenarioRunError, run
from .scenario import ScenarioError, load_scenario

log = logging.getLogger("flashgov")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flashgov", description="DAO flash-loan governance simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run scenarios"), ("sweep", "run the sweep section of scenarios")):
        p = sub.add_parser(name, help=text)
        p.add_argument("scenarios", nargs="+")
        p.add_argument("--out", help="CSV path (default: stdout)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--no-timing", action="store_true", help="leave wall_time_ms empty")
    p = sub.add_parser("validate", help="parse and check scenarios without running them")
    p.add_argument("scenarios", nargs="+")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    configs = []
    for path in args.scenarios:
        try:
            configs.append(load_scenario(path))
        except (ScenarioError, OSError) as e:
            print(f"{path}: {e}", file=sys.stderr)
            return EXIT_INVALID
        log.info("loaded %s (%s)", path, configs[-1].id)

    if args.command == "validate":
        for path in args.scenarios:
            print(f"{path}: ok")
        return EXIT_OK

    if args.command == "sweep":
        missing = [c.id for c in configs if c.sweep is None]
        if missing:
            print(f"no [sweep] section in: {', '.join(missing)}", file=sys.stderr)
            return EXIT_INVALID

    rows = []
    for config in sorted(configs, key=lambda c: c.id):
        try:
            rows.extend(run(config, workers=args.workers))
        except ScenarioRunError as e:
            print(str(e), file=sys.stderr)
            return EXIT_RUNTIME
    text = format_csv(rows, timing=not args.no_timing)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as e:
            print(f"cannot write {args.out}: {e}", file=sys.stderr)
            return EXIT_RUNTIME
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
