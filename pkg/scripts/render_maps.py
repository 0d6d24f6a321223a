"""Plan one trial on every bundled scenario and write an SVG figure per map.

    python scripts/render_maps.py --out-dir figures --planner krrf --seed 0
"""
import argparse
from pathlib import Path

from krrf.io import BUNDLED_MAPS, load_scenario
from krrf.runner import run_trial
from krrf.svg import render_svg


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="figures")
    ap.add_argument("--planner", default="krrf", choices=["krrf", "lazytsp"])
    ap.add_argument("--model", choices=["car", "diff", "bike", "dubins"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--time-limit", type=float, default=60.0)
    args = ap.parse_args(argv)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for m in BUNDLED_MAPS:
        sc = load_scenario(f"{m}_5")
        if args.model:
            sc = sc.with_(model=args.model, preset="ge2020" if args.model == "bike" else None)
        res = run_trial(sc, args.planner, args.seed, time_limit=args.time_limit)
        rec = res.record
        path = out / f"{m}_{sc.model}_{args.planner}.svg"
        render_svg(sc.world(), res.trajectory, sc.targets, sc.planner_params().R_f, path)
        status = f"cost {rec.cost:.1f}" if rec.success else f"failed ({rec.fail_reason}), map only"
        print(f"{path}: {status}")


if __name__ == "__main__":
    main()
