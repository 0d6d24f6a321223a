"""LazyTSP comparator producing a continuous multi-goal trajectory.

Tours are solved on Euclidean distances first; edges of the current tour are
then planned one by one with a goal-biased kinodynamic RRT and their costs
replaced by real trajectory lengths. A failed edge becomes infinitely
expensive. Once the optimal tour consists only of planned edges, the final
trajectory is reconstructed along them exactly as KRRF does.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import tsp
from .forest import (NO_DEADLINE, Context, Deadline, PlannerParams, Tree, dist2d, monte_carlo_expand,
                     random_config, root_config)
from .geom2d import World
from .guide import GuideParams, MultiGoalTrajectory, reconstruct, sample_near
from .models import MotionModel, Trajectory


class BaselineFailure(RuntimeError):
    pass


@dataclass
class LazyParams:
    edge_iterations: int = 30_000
    goal_bias: float = 0.1


@dataclass
class LazyResult:
    trajectory: MultiGoalTrajectory
    tour: tsp.Tour
    matrix: np.ndarray
    edges: Dict[Tuple[int, int], Trajectory]
    rounds: int
    timings: Dict[str, float] = field(default_factory=dict)


def plan_edge(world: World, model: MotionModel, q_start, goal, params: PlannerParams, lazy: LazyParams,
              rng: np.random.Generator, deadline: Deadline = NO_DEADLINE) -> Optional[Trajectory]:
    """Single-tree RRT from ``q_start`` until a node enters the goal region."""
    ctx = Context(world, model, rng, params.t_max, deadline)
    tree = Tree(np.asarray(q_start, dtype=np.float64))
    for it in range(lazy.edge_iterations):
        if it % 64 == 0:
            deadline.check()
        if rng.random() < lazy.goal_bias:
            q_rand = sample_near(model, goal, params.R_f, rng)
        else:
            q_rand = random_config(model, world, rng)
        q = monte_carlo_expand(tree, tree.nearest(q_rand), q_rand, params.n_exp, ctx)
        if q is not None and dist2d(tree.states[q], goal) <= params.R_f:
            return tree.path_to(q)
    return None


def euclidean_matrix(targets: Sequence) -> np.ndarray:
    pts = np.asarray(targets, dtype=np.float64)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def lazy_plan(world: World, model: MotionModel, targets: Sequence, params: PlannerParams,
              guide_params: GuideParams, rng: np.random.Generator, lazy: Optional[LazyParams] = None,
              deadline: Deadline = NO_DEADLINE, history: Optional[List[np.ndarray]] = None,
              heading: Optional[float] = None, timings: Optional[Dict[str, float]] = None) -> LazyResult:
    """Edge planning time is reported under ``forest`` so records line up with KRRF."""
    lazy = lazy or LazyParams()
    timings = {} if timings is None else timings
    n = len(targets)
    if n < 2:
        raise ValueError("need at least two targets")
    roots = [root_config(model, world, r, rng, heading) for r in targets]
    d = euclidean_matrix(targets)
    verified: Dict[Tuple[int, int], Trajectory] = {}
    timings.update(forest=0.0, tsp=0.0, guide=0.0)
    rounds = 0
    while True:
        rounds += 1
        t0 = time.perf_counter()
        tour = tsp.solve(d, rng)
        timings["tsp"] += time.perf_counter() - t0
        if not math.isfinite(tour.cost):
            raise BaselineFailure("no finite-cost tour remains")
        pending = [tuple(sorted(e)) for e in tour.edges()]
        pending = [e for k, e in enumerate(pending) if e not in verified and e not in pending[:k]]
        if not pending:
            break
        t0 = time.perf_counter()
        try:
            for i, j in pending:
                tau = plan_edge(world, model, roots[i], targets[j], params, lazy, rng, deadline)
                if tau is None:
                    d[i, j] = d[j, i] = math.inf
                    break
                verified[(i, j)] = tau
                d[i, j] = d[j, i] = tau.total_length
        finally:
            timings["forest"] += time.perf_counter() - t0
        if history is not None:
            history.append(d.copy())
    trajectories: Dict[Tuple[int, int], Trajectory] = {}
    for (i, j), tau in verified.items():
        trajectories[(i, j)] = tau
        trajectories[(j, i)] = tau
    t0 = time.perf_counter()
    try:
        mgt = reconstruct(world, model, targets, tour.order, trajectories, guide_params, rng,
                          q_start=roots[tour.order[0]], deadline=deadline)
    finally:
        timings["guide"] += time.perf_counter() - t0
    return LazyResult(mgt, tour, d, verified, rounds, dict(timings))
