"""End-to-end KRRF: forest, tour, guided reconstruction."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from . import tsp
from .forest import NO_DEADLINE, Deadline, Forest, PlannerParams, build_forest, root_config
from .geom2d import World
from .guide import GuideParams, MultiGoalTrajectory, reconstruct
from .models import MotionModel


@dataclass
class KrrfResult:
    trajectory: MultiGoalTrajectory
    tour: tsp.Tour
    matrix: np.ndarray
    forest: Forest
    timings: Dict[str, float] = field(default_factory=dict)


def krrf_plan(world: World, model: MotionModel, targets: Sequence, params: PlannerParams,
              guide_params: GuideParams, rng: np.random.Generator,
              deadline: Deadline = NO_DEADLINE, heading: Optional[float] = None,
              timings: Optional[Dict[str, float]] = None) -> KrrfResult:
    """Forest, tour and reconstruction; ``timings`` (if given) is filled phase by phase."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    try:
        roots = [root_config(model, world, r, rng, heading) for r in targets]
        forest = build_forest(world, model, targets, params, rng, deadline, roots=roots)
    finally:
        timings["forest"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    d = tsp.matrix_from_forest(forest.trajectories, len(targets))
    tour = tsp.solve(d, rng)
    timings["tsp"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    try:
        mgt = reconstruct(world, model, targets, tour.order, forest.trajectories, guide_params, rng,
                          q_start=roots[tour.order[0]], deadline=deadline)
    finally:
        timings["guide"] = time.perf_counter() - t2
    return KrrfResult(mgt, tour, d, forest, dict(timings))
