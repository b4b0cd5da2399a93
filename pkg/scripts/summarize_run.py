#!/usr/bin/env python3
"""Print a compact summary of a pipeline output directory.

Shows record accounting, before/after filter counts and, per feature, the
Tukey fences together with the number of flagged values.

    python scripts/summarize_run.py out/synth
"""

import argparse
import csv
from pathlib import Path


def read(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args()
    out = args.out_dir

    if (out / "accounting.csv").exists():
        print("== record accounting")
        for row in read(out / "accounting.csv"):
            print(f"  {row['dataset']:<8} {row['item']:<26} {row['count']:>8}")

    if (out / "filter_stats.csv").exists():
        print("== filter (before -> after)")
        for row in read(out / "filter_stats.csv"):
            print(f"  {row['statistic']:<16} {row['before']:>8} -> {row['after']:<8}")

    if (out / "filter_report.csv").exists():
        print("== fences")
        print(f"  {'feature':<16} {'lower':>9} {'upper':>9} {'flagged':>8}")
        for row in read(out / "filter_report.csv"):
            print(f"  {row['feature']:<16} {row['lower']:>9} {row['upper']:>9} {row['flagged_count']:>8}")

    if (out / "shill_check.csv").exists():
        rows = read(out / "shill_check.csv")
        bad = [r["bidder_id"] for r in rows if r["n_violations"] != "0"]
        print(f"== shill check: {len(rows) - len(bad)}/{len(rows)} within bounds")
        for bidder in bad:
            print(f"  violated: {bidder}")


if __name__ == "__main__":
    main()
