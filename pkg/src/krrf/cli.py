"""Command line: plan, bench, dump-matrix, validate.

Exit codes: 0 success, 1 trial crash (or an invalid trajectory for
``validate``), 2 unreadable scenario, map or trajectory file.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from .geom2d import MapParseError
from .guide import validate
from .io import (ScenarioParseError, check_scenario, load_scenario, load_trajectory, matrix_to_csv, save_trajectory,
                 write_records)
from .runner import PLANNERS, is_crash, run_batch, run_trial
from .svg import render_svg

EXIT_OK, EXIT_CRASH, EXIT_PARSE = 0, 1, 2


class _ParseFailure(Exception):
    pass


def _scenario(args):
    try:
        sc = load_scenario(args.scenario)
        changes = {}
        if args.model is not None:
            changes["model"] = args.model
            changes["preset"] = args.preset
        elif args.preset is not None:
            changes["preset"] = args.preset
        if args.targets is not None:
            if args.targets < 2 or args.targets > len(sc.targets):
                raise ScenarioParseError(f"--targets must lie in [2, {len(sc.targets)}]")
            changes["targets"] = sc.targets[: args.targets]
            changes["name"] = f"{sc.name}[:{args.targets}]"
        if changes:
            sc = sc.with_(**changes)
        check_scenario(sc)
        return sc
    except (ScenarioParseError, MapParseError, ValueError) as exc:
        raise _ParseFailure(str(exc)) from None


def _print_record(rec, stream=None):
    cost = "-" if rec.cost is None else f"{rec.cost:.3f}"
    status = "ok" if rec.success else f"failed ({rec.fail_reason})"
    print(f"{rec.scenario} {rec.planner} seed={rec.seed} {status} cost={cost} "
          f"t_forest={rec.t_forest:.3f} t_tsp={rec.t_tsp:.3f} t_guide={rec.t_guide:.3f} t_total={rec.t_total:.3f}",
          file=stream)


def cmd_plan(args) -> int:
    sc = _scenario(args)
    res = run_trial(sc, args.planner, args.seed, args.time_limit)
    _print_record(res.record)
    if res.trajectory is not None and res.record.success:
        if args.out:
            save_trajectory(res.trajectory, args.out)
        if args.svg:
            render_svg(sc.world(), res.trajectory, sc.targets, sc.planner_params().R_f, args.svg)
    elif args.svg:
        render_svg(sc.world(), None, sc.targets, sc.planner_params().R_f, args.svg)
    return EXIT_CRASH if is_crash(res.record) else EXIT_OK


def cmd_bench(args) -> int:
    sc = _scenario(args)
    records, summary = run_batch(sc, args.planner, args.trials, args.seed_base, args.jobs, args.time_limit)
    if args.out:
        with Path(args.out).open("w", newline="") as fh:
            write_records(records, fh)
    for rec in records:
        _print_record(rec)

    def pm(mean, std):
        return "-" if mean is None else f"{mean:.3f} +- {std:.3f}"

    print(f"success {summary.successes}/{summary.trials} ({100 * summary.success_rate:.1f}%) "
          f"cost {pm(summary.cost_mean, summary.cost_std)} time {pm(summary.time_mean, summary.time_std)}")
    return EXIT_CRASH if any(is_crash(r) for r in records) else EXIT_OK


def cmd_dump_matrix(args) -> int:
    sc = _scenario(args)
    res = run_trial(sc, args.planner, args.seed, args.time_limit)
    if res.matrix is None:
        _print_record(res.record, sys.stderr)
        return EXIT_CRASH
    text = matrix_to_csv(res.matrix)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    sc = _scenario(args)
    try:
        mgt = load_trajectory(args.trajectory)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise _ParseFailure(f"cannot read trajectory: {exc}") from None
    problems = validate(mgt, sc.world(), sc.make_model(), sc.targets, mgt.order, sc.planner_params().R_f)
    for p in problems:
        print(f"{p.kind} leg={p.leg}: {p.detail}")
    print("valid" if not problems else f"{len(problems)} violation(s)")
    return EXIT_OK if not problems else EXIT_CRASH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="krrf", description="Kinodynamic multi-goal planning.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, planner=True):
        p.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
        p.add_argument("--model", choices=("car", "diff", "bike", "dubins"), help="override the scenario model")
        p.add_argument("--preset", help="bike constants preset (e.g. ge2020)")
        p.add_argument("--targets", type=int, help="keep only the first N targets")
        if planner:
            p.add_argument("--planner", choices=PLANNERS, default="krrf")
            p.add_argument("--time-limit", type=float, help="wall-clock limit per trial in seconds")

    p = sub.add_parser("plan", help="run one trial")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="write the trajectory as JSON")
    p.add_argument("--svg", help="write an SVG figure")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="run seeded trials and write CSV records")
    common(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump-matrix", help="print the TSP cost matrix of one trial as CSV")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_matrix)

    p = sub.add_parser("validate", help="check a trajectory JSON against a scenario")
    common(p, planner=False)
    p.add_argument("--trajectory", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "trials", 1) < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except _ParseFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
