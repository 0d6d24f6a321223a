"""Reconstruction of one continuous multi-goal trajectory along the tour.

Each leg grows a fresh tree from the end of the previous leg, sampling mostly
around an active waypoint taken from the forest trajectory of that pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .forest import (NO_DEADLINE, Context, Deadline, Tree, dist2d, monte_carlo_expand, random_config,
                     root_config)
from .geom2d import World
from .models import MotionModel, Trajectory, replay


class ReconstructFailure(RuntimeError):
    def __init__(self, completed: int, attempts: int):
        super().__init__(f"leg {completed + 1} failed {attempts} times in a row")
        self.completed = completed
        self.attempts = attempts


@dataclass
class GuideParams:
    xi: float = 0.9
    k: int = 25_000
    A_max: Optional[int] = None  # None: 5 * number of targets
    R_f: float = 50.0
    n_exp: int = 10
    t_max: float = 1.5

    def __post_init__(self):
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError("xi must lie in [0, 1]")
        if self.k < 1 or (self.A_max is not None and self.A_max < 1):
            raise ValueError("k and A_max must be >= 1")
        if not (self.R_f > 0 and self.n_exp >= 1 and self.t_max > 0):
            raise ValueError("R_f, n_exp, t_max must be positive")

    def attempts(self, n_targets: int) -> int:
        return self.A_max if self.A_max is not None else 5 * n_targets


@dataclass
class Leg:
    trajectory: Trajectory
    target: int
    iterations: int
    attempts: int


@dataclass
class MultiGoalTrajectory:
    order: Tuple[int, ...]
    legs: List[Leg] = field(default_factory=list)

    @property
    def segments(self) -> List[Trajectory]:
        return [leg.trajectory for leg in self.legs]

    @property
    def cost(self) -> float:
        return float(sum(leg.trajectory.total_length for leg in self.legs))


@dataclass
class GuideStats:
    guided: int = 0
    uniform: int = 0
    waypoint_trace: List[int] = field(default_factory=list)


def waypoints(guide: Trajectory, spacing: float, reverse: bool = False) -> np.ndarray:
    """Guide states thinned to roughly ``spacing`` apart along the path (endpoints kept)."""
    states = guide.states()
    if reverse:
        states = states[::-1]
    keep = [0]
    acc = 0.0
    for k in range(1, len(states)):
        acc += dist2d(states[k], states[k - 1])
        if acc >= spacing:
            keep.append(k)
            acc = 0.0
    if keep[-1] != len(states) - 1:
        keep.append(len(states) - 1)
    return states[keep]


def sample_near(model: MotionModel, centre, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform position in the disc around ``centre``, uniform heading."""
    r = radius * math.sqrt(rng.random())
    a = 2.0 * math.pi * rng.random()
    th = math.pi - 2.0 * math.pi * rng.random()
    return model.make_config(centre[0] + r * math.cos(a), centre[1] + r * math.sin(a), th)


def guided_segment(world: World, model: MotionModel, q_start, guide_states: np.ndarray, target,
                   params: GuideParams, rng: np.random.Generator, deadline: Deadline = NO_DEADLINE,
                   stats: Optional[GuideStats] = None) -> Tuple[Optional[Trajectory], int]:
    """Grow a tree from ``q_start`` biased along ``guide_states`` until ``target`` is reached.

    Returns ``(trajectory or None, iterations used)``.
    """
    ctx = Context(world, model, rng, params.t_max, deadline)
    tree = Tree(np.asarray(q_start, dtype=np.float64))
    active = 0
    last = len(guide_states) - 1
    for it in range(1, params.k + 1):
        if it % 64 == 0:
            deadline.check()
        if rng.random() < params.xi:
            q_rand = sample_near(model, guide_states[active], params.R_f, rng)
            if stats is not None:
                stats.guided += 1
        else:
            q_rand = random_config(model, world, rng)
            if stats is not None:
                stats.uniform += 1
        q = monte_carlo_expand(tree, tree.nearest(q_rand), q_rand, params.n_exp, ctx)
        if q is None:
            continue
        q_new = tree.states[q]
        if dist2d(q_new, target) <= params.R_f:
            return tree.path_to(q), it
        if active < last and dist2d(q_new, guide_states[active]) <= params.R_f:
            active += 1
        if stats is not None:
            stats.waypoint_trace.append(active)
    return None, params.k


def guide_for(trajectories: Dict[Tuple[int, int], Trajectory], a: int, b: int, spacing: float) -> np.ndarray:
    """Waypoints from target ``a`` toward ``b``; stored trajectories run from the lower index."""
    tau = trajectories[(a, b)]
    return waypoints(tau, spacing, reverse=a > b)


def reconstruct(world: World, model: MotionModel, targets: Sequence, order: Sequence[int],
                trajectories: Dict[Tuple[int, int], Trajectory], params: GuideParams,
                rng: np.random.Generator, q_start=None, deadline: Deadline = NO_DEADLINE) -> MultiGoalTrajectory:
    """Plan the closed tour leg by leg; raises ReconstructFailure after A_max straight failures."""
    n = len(order)
    order = tuple(int(i) for i in order)
    if q_start is None:
        q_start = root_config(model, world, targets[order[0]], rng)
    a_max = params.attempts(len(targets))
    out = MultiGoalTrajectory(order)
    q = np.asarray(q_start, dtype=np.float64)
    i = 0
    a = 0
    while i < n:
        src, dst = order[i], order[(i + 1) % n]
        guide = guide_for(trajectories, src, dst, 0.5 * params.R_f)
        tau, iters = guided_segment(world, model, q, guide, targets[dst], params, rng, deadline)
        if tau is not None:
            out.legs.append(Leg(tau, dst, iters, a + 1))
            q = tau.end
            i += 1
            a = 0
        else:
            a += 1
            if a >= a_max:
                raise ReconstructFailure(i, a)
    return out


@dataclass
class Violation:
    kind: str
    leg: int
    detail: str


def validate(mgt: MultiGoalTrajectory, world: World, model: MotionModel, targets: Sequence,
             order: Sequence[int], R_f: float, drift_tol: float = 1e-6) -> List[Violation]:
    """Check a multi-goal trajectory; an empty list means it is valid."""
    out: List[Violation] = []
    order = tuple(order)
    n = len(order)
    if tuple(mgt.order) != order:
        out.append(Violation("order", -1, f"trajectory order {mgt.order} != {order}"))
    if len(mgt.legs) != n:
        out.append(Violation("legs", -1, f"{len(mgt.legs)} legs for {n} targets"))
    if not mgt.legs:
        return out
    first = mgt.legs[0].trajectory
    if first.segments and dist2d(first.start, targets[order[0]]) > R_f:
        out.append(Violation("target", 0, "start is outside the first target region"))
    prev_end = None
    for li, leg in enumerate(mgt.legs):
        tau = leg.trajectory
        if not tau.segments:
            out.append(Violation("legs", li, "empty leg"))
            continue
        if prev_end is not None and not np.array_equal(prev_end, tau.start):
            out.append(Violation("junction", li, "leg does not start where the previous one ended"))
        for si, (s0, s1) in enumerate(zip(tau.segments, tau.segments[1:])):
            if not np.array_equal(s0.end, s1.start):
                out.append(Violation("junction", li, f"rollouts {si}/{si + 1} detached"))
        for si, seg in enumerate(tau.segments):
            if not model.admissible(seg.control):
                out.append(Violation("control", li, f"rollout {si}: control {seg.control} not admissible"))
            hit = world.first_collision(seg.states)
            if hit >= 0:
                out.append(Violation("collision", li, f"rollout {si}, sample {hit} collides"))
        expect = order[(li + 1) % n] if li < n else None
        if expect is not None and dist2d(tau.end, targets[expect]) > R_f:
            out.append(Violation("target", li, f"leg ends {dist2d(tau.end, targets[expect]):.3f} from target {expect}"))
        # replay each rollout from its own start, then the whole chain from the leg start
        for si, seg in enumerate(tau.segments):
            again = model.integrate(seg.start, seg.control, seg.duration)
            if again.shape != seg.states.shape:
                out.append(Violation("continuity", li, f"rollout {si}: sample count differs on replay"))
                continue
            dev = np.max(np.hypot(again[:, 0] - seg.states[:, 0], again[:, 1] - seg.states[:, 1]))
            if dev > drift_tol:
                out.append(Violation("continuity", li, f"rollout {si}: samples off the integrated curve by {dev:.3g}"))
        chain = replay(model, tau.start, tau.controls())
        drift = dist2d(chain[-1][-1], tau.end)
        if drift > drift_tol:
            out.append(Violation("replay", li, f"endpoint drift {drift:.3g}"))
        prev_end = tau.end
    return out
