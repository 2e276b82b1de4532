"""Run every scenario under scenarios/ and write one CSV report.

    python3 scripts/run_corpus.py --out results/corpus.csv --workers 4
"""

import argparse
import sys
from pathlib import Path

from flashgov.harness import emit_csv, format_csv, load_scenario, run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--dir", type=Path, default=ROOT / "scenarios")
    ap.add_argument("--out", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--no-timing", action="store_true")
    args = ap.parse_args()

    configs = sorted((load_scenario(p) for p in args.dir.glob("*.toml")), key=lambda c: c.id)
    rows = [row for c in configs for row in run(c, workers=args.workers)]
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        emit_csv(rows, args.out, timing=not args.no_timing)
        print(f"{len(rows)} rows from {len(configs)} scenarios -> {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(format_csv(rows, timing=not args.no_timing))


if __name__ == "__main__":
    main()
