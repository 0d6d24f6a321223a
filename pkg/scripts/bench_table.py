"""Benchmark grid: success rate, cost and phase timings per map, model, target count and planner.

Example (small grid, a few minutes on one core):

    python scripts/bench_table.py --maps potholes_s bugtrap_s --models car diff --targets 5 \
        --trials 10 --time-limit 60 --csv results.csv
"""
import argparse
import statistics
import sys
from pathlib import Path

from krrf.io import BUNDLED_MAPS, load_scenario, write_records
from krrf.runner import run_batch


def variant(map_name, model, n):
    base = load_scenario(f"{map_name}_5")
    if n > len(base.targets):
        raise SystemExit(f"{map_name} ships {len(base.targets)} targets, asked for {n}")
    return base.with_(model=model, preset="ge2020" if model == "bike" else None, targets=base.targets[:n],
                      name=f"{map_name}/{model}/{n}")


def pm(values, digits=1):
    if not values:
        return "-"
    return f"{statistics.fmean(values):.{digits}f} ± {statistics.pstdev(values):.{digits}f}"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--maps", nargs="+", default=list(BUNDLED_MAPS), choices=BUNDLED_MAPS)
    ap.add_argument("--models", nargs="+", default=["car", "diff"], choices=["car", "diff", "bike", "dubins"])
    ap.add_argument("--targets", nargs="+", type=int, default=[5])
    ap.add_argument("--planners", nargs="+", default=["krrf", "lazytsp"], choices=["krrf", "lazytsp"])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed-base", type=int, default=0)
    ap.add_argument("--time-limit", type=float, default=60.0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--csv", help="write every trial record to this file")
    args = ap.parse_args(argv)

    all_records = []
    header = ("| scenario | planner | success | cost | time [s] | forest [s] | tsp [s] | guide [s] |\n"
              "|---|---|---|---|---|---|---|---|")
    print(header)
    for m in args.maps:
        for model in args.models:
            for n in args.targets:
                sc = variant(m, model, n)
                for planner in args.planners:
                    recs, summary = run_batch(sc, planner, args.trials, args.seed_base, args.jobs, args.time_limit)
                    all_records.extend(recs)
                    ok = [r for r in recs if r.success]
                    print(f"| {sc.name} | {planner} | {100 * summary.success_rate:.0f}% | {pm([r.cost for r in ok])} "
                          f"| {pm([r.t_total for r in ok], 2)} | {pm([r.t_forest for r in ok], 2)} "
                          f"| {pm([r.t_tsp for r in ok], 2)} | {pm([r.t_guide for r in ok], 2)} |", flush=True)
    if args.csv:
        with Path(args.csv).open("w", newline="") as fh:
            write_records(all_records, fh)
        print(f"wrote {len(all_records)} records to {args.csv}", file=sys.stderr)


if __name__ == "__main__":
    main()
