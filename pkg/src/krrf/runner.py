"""Seeded trials and batches over a scenario."""
from __future__ import annotations

import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .baseline import BaselineFailure, lazy_plan
from .forest import Deadline, ForestTimeout, PlanTimeout
from .guide import MultiGoalTrajectory, ReconstructFailure, validate
from .io import Scenario, TrialRecord, check_scenario
from .models import DegenerateDynamics
from .planner import krrf_plan

PLANNERS = ("krrf", "lazytsp")


@dataclass
class TrialResult:
    record: TrialRecord
    trajectory: Optional[MultiGoalTrajectory] = None
    matrix: Optional[np.ndarray] = None


def run_trial(scenario: Scenario, planner: str = "krrf", seed: Optional[int] = None,
              time_limit: Optional[float] = None) -> TrialResult:
    """Run one seeded trial; failures of any kind land in the record."""
    seed = scenario.seed if seed is None else seed
    limit = scenario.time_limit if time_limit is None else time_limit
    start = time.perf_counter()
    timings = {"forest": 0.0, "tsp": 0.0, "guide": 0.0}

    def record(success, cost=None, reason=""):
        return TrialRecord(scenario.name, planner, seed, success, cost, timings["forest"], timings["tsp"],
                           timings["guide"], time.perf_counter() - start, reason)

    try:
        if planner not in PLANNERS:
            raise ValueError(f"unknown planner {planner!r}")
        world = check_scenario(scenario)
        model = scenario.make_model()
        params = scenario.planner_params()
        guide = scenario.guide_params()
        heading = scenario.params.get("heading")
        rng = np.random.default_rng(seed)
        deadline = Deadline(limit)
        if planner == "krrf":
            res = krrf_plan(world, model, scenario.targets, params, guide, rng, deadline, heading, timings)
        else:
            res = lazy_plan(world, model, scenario.targets, params, guide, rng, scenario.lazy_params(), deadline,
                            heading=heading, timings=timings)
        mgt = res.trajectory
        problems = validate(mgt, world, model, scenario.targets, mgt.order, params.R_f)
        if problems:
            return TrialResult(record(False, None, f"invalid: {problems[0].kind}"), mgt, res.matrix)
        return TrialResult(record(True, mgt.cost), mgt, res.matrix)
    except PlanTimeout:
        return TrialResult(record(False, None, "timeout"))
    except ForestTimeout:
        return TrialResult(record(False, None, "forest_cap"))
    except ReconstructFailure:
        return TrialResult(record(False, None, "reconstruct"))
    except BaselineFailure:
        return TrialResult(record(False, None, "baseline"))
    except DegenerateDynamics:
        return TrialResult(record(False, None, "degenerate_dynamics"))
    except Exception as exc:  # noqa: BLE001 - a crash is data for the batch
        return TrialResult(record(False, None, f"crash: {type(exc).__name__}: {exc}"))


def is_crash(rec: TrialRecord) -> bool:
    return rec.fail_reason.startswith("crash")


def _trial_job(args) -> TrialRecord:
    scenario, planner, seed, limit = args
    return run_trial(scenario, planner, seed, limit).record


@dataclass
class Summary:
    trials: int
    successes: int
    success_rate: float
    cost_mean: Optional[float]
    cost_std: Optional[float]
    time_mean: Optional[float]
    time_std: Optional[float]


def summarize(records: Sequence[TrialRecord]) -> Summary:
    ok = [r for r in records if r.success]
    costs = [r.cost for r in ok]
    times = [r.t_total for r in ok]
    n = len(records)
    if not ok:
        return Summary(n, 0, 0.0, None, None, None, None)
    return Summary(n, len(ok), len(ok) / n, statistics.fmean(costs), statistics.pstdev(costs),
                   statistics.fmean(times), statistics.pstdev(times))


def run_batch(scenario: Scenario, planner: str, n_trials: int, seed_base: int = 0, jobs: int = 1,
              time_limit: Optional[float] = None) -> Tuple[List[TrialRecord], Summary]:
    """Trial ``k`` uses seed ``seed_base + k``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    args = [(scenario, planner, seed_base + k, time_limit) for k in range(n_trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_trial_job, args))
    else:
        records = [_trial_job(a) for a in args]
    return records, summarize(records)
