"""Cumulative fraction of trials solved within a given time, per scenario and planner.

Reads the CSV written by ``bench_table.py --csv`` and prints (or writes) rows
``scenario,planner,seconds,fraction``.  Failed trials never count as solved,
so each curve levels off at the success rate.

    python scripts/time_cdf.py results.csv --out cdf.csv
"""
import argparse
import csv
import sys
from collections import defaultdict
from pathlib import Path

from krrf.io import read_records


def cdf_rows(records):
    groups = defaultdict(list)
    for r in records:
        groups[(r.scenario, r.planner)].append(r)
    for (scenario, planner), recs in sorted(groups.items()):
        times = sorted(r.t_total for r in recs if r.success)
        yield scenario, planner, 0.0, 0.0
        for k, t in enumerate(times, start=1):
            yield scenario, planner, t, k / len(recs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("records", help="CSV of trial records")
    ap.add_argument("--out", help="output CSV (default: stdout)")
    args = ap.parse_args(argv)
    with Path(args.records).open(newline="") as fh:
        records = read_records(fh)
    out = Path(args.out).open("w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["scenario", "planner", "seconds", "fraction"])
        for row in cdf_rows(records):
            w.writerow(row)
    finally:
        if args.out:
            out.close()


if __name__ == "__main__":
    main()
