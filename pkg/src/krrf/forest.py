"""Forest construction: one forward-simulated tree per target, grown pairwise.

For each unsolved pair ``i < j`` a round expands ``T_j`` toward a random
configuration, then ``T_i`` either by the cross-tree heuristic or by plain
random expansion. The pair is solved once a new ``T_i`` node reaches the
``R_f`` disc of target ``j``; that trajectory serves both directions.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geom2d import World
from .models import MotionModel, Segment, Trajectory, sample_durations, trajectory_length
from .spatial import SpatialIndex


class ForestTimeout(RuntimeError):
    def __init__(self, unsolved, rounds):
        super().__init__(f"{len(unsolved)} target pairs unsolved after {rounds} rounds")
        self.unsolved = list(unsolved)
        self.rounds = rounds


class PlanTimeout(RuntimeError):
    """Wall-clock budget exhausted."""


class Deadline:
    def __init__(self, seconds: Optional[float] = None):
        self.expires = None if seconds is None else time.monotonic() + seconds

    def check(self):
        if self.expires is not None and time.monotonic() > self.expires:
            raise PlanTimeout("wall-clock limit exceeded")


NO_DEADLINE = Deadline(None)


@dataclass
class PlannerParams:
    R_f: float = 50.0
    h_r: float = 50.0
    n_exp: int = 10
    t_max: float = 1.5
    gamma: float = 0.7
    pair_iteration_cap: int = 200_000

    def __post_init__(self):
        if not (self.R_f > 0 and self.h_r > 0 and self.n_exp >= 1 and self.t_max > 0
                and self.pair_iteration_cap >= 1):
            raise ValueError("planner parameters must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


def dist2d(a, b) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return math.sqrt(dx * dx + dy * dy)


def random_config(model: MotionModel, world: World, rng: np.random.Generator) -> np.ndarray:
    xmin, ymin, xmax, ymax = world.bounds
    x = rng.uniform(xmin, xmax)
    y = rng.uniform(ymin, ymax)
    th = math.pi - 2.0 * math.pi * rng.random()  # (-pi, pi]
    return model.make_config(x, y, th)


def root_config(model: MotionModel, world: World, target, rng: np.random.Generator,
                heading: Optional[float] = None, tries: int = 256) -> np.ndarray:
    """Configuration at ``target`` with a random collision-free heading."""
    if heading is not None:
        q = model.make_config(target[0], target[1], heading)
        if world.config_collides(q):
            raise ValueError(f"target {tuple(target)} collides at heading {heading}")
        return q
    for _ in range(tries):
        q = model.make_config(target[0], target[1], math.pi - 2.0 * math.pi * rng.random())
        if not world.config_collides(q):
            return q
    raise ValueError(f"target {tuple(target)} is not collision-free for any sampled heading")


class Tree:
    """Forward-simulated search tree; node ids are insertion indices."""

    def __init__(self, root: np.ndarray, root_target: int = -1):
        self.root_target = root_target
        self.states: List[np.ndarray] = [np.asarray(root, dtype=np.float64)]
        self.parent: List[int] = [-1]
        self.cost: List[float] = [0.0]
        self.inbound: List[Optional[Segment]] = [None]
        self.index = SpatialIndex()
        self.index.insert(0, root)
        self._costs = np.zeros(64)

    def __len__(self):
        return len(self.states)

    @property
    def root(self) -> np.ndarray:
        return self.states[0]

    def add(self, parent: int, segment: Segment) -> int:
        nid = len(self.states)
        self.states.append(segment.end)
        self.parent.append(parent)
        self.cost.append(self.cost[parent] + segment.length)
        if nid == self._costs.shape[0]:
            self._costs = np.concatenate([self._costs, np.empty_like(self._costs)])
        self._costs[nid] = self.cost[nid]
        self.inbound.append(segment)
        self.index.insert(nid, segment.end)
        return nid

    def nearest(self, q) -> int:
        return self.index.nearest(q)[0]

    def costs(self) -> np.ndarray:
        """Cost-to-root of every node, indexed by node id."""
        return self._costs[: len(self.states)]

    def path_to(self, nid: int) -> Trajectory:
        segs = []
        while self.parent[nid] >= 0:
            segs.append(self.inbound[nid])
            nid = self.parent[nid]
        segs.reverse()
        return Trajectory(segs)


class HeuristicQueue:
    """Min-priority queue keyed by node id with update-if-smaller semantics."""

    def __init__(self):
        self._heap: List[Tuple[float, int]] = []
        self._p: Dict[int, float] = {}

    def __len__(self):
        return len(self._p)

    def __contains__(self, node_id):
        return node_id in self._p

    def get(self, node_id) -> Optional[float]:
        return self._p.get(node_id)

    def push(self, node_id: int, p: float) -> bool:
        """Insert, or lower an existing entry; returns True if stored."""
        old = self._p.get(node_id)
        if old is not None and not p < old:
            return False
        self._p[node_id] = p
        heapq.heappush(self._heap, (p, node_id))
        return True

    def pop(self) -> Tuple[int, float]:
        while self._heap:
            p, nid = heapq.heappop(self._heap)
            if self._p.get(nid) == p:
                del self._p[nid]
                return nid, p
        raise IndexError("pop from empty queue")

    def items(self) -> Dict[int, float]:
        return dict(self._p)


@dataclass
class ExpandStats:
    """Counters of the expansion branch taken for ``T_i``."""

    heuristic: int = 0
    forward: int = 0
    random: int = 0


@dataclass
class Context:
    world: World
    model: MotionModel
    rng: np.random.Generator
    t_max: float = 1.5
    deadline: Deadline = field(default_factory=lambda: NO_DEADLINE)


def monte_carlo_expand(tree: Tree, from_id: int, q_to, trials: int, ctx: Context) -> Optional[int]:
    """Attach the collision-free rollout ending closest to ``q_to``; None if all collide."""
    q_from = tree.states[from_id]
    controls = ctx.model.sample_controls(ctx.rng, trials)
    durations = sample_durations(ctx.rng, ctx.t_max, trials)
    k = ctx.model.best_rollout(q_from, controls, durations, ctx.world, q_to)
    if k < 0:
        return None
    u = controls[k].copy()
    t = float(durations[k])
    return tree.add(from_id, Segment(u, t, ctx.model.integrate(q_from, u, t)))


def heuristic_value(q, tree_j: Tree) -> float:
    """Distance to the nearest node of ``tree_j`` plus that node's cost to its root."""
    nid, d = tree_j.index.nearest(q)
    return d + tree_j.cost[nid]


def expand_trees(tree_i: Tree, tree_j: Tree, queue: HeuristicQueue, target_j, params: PlannerParams,
                 ctx: Context, stats: Optional[ExpandStats] = None) -> Optional[Trajectory]:
    """One growth round for the pair (i, j); returns the i-to-j trajectory once found."""
    rng = ctx.rng
    q_rand = random_config(ctx.model, ctx.world, rng)
    q = monte_carlo_expand(tree_j, tree_j.nearest(q_rand), q_rand, params.n_exp, ctx)
    if q is not None:
        q_new = tree_j.states[q]
        other, d = tree_i.index.nearest(q_new)
        queue.push(other, d + tree_j.cost[q])

    q_rand = random_config(ctx.model, ctx.world, rng)
    near = tree_i.nearest(q_rand)
    if rng.random() < params.gamma:
        if len(queue) == 0:
            if stats is not None:
                stats.forward += 1
            q = monte_carlo_expand(tree_i, near, q_rand, params.n_exp, ctx)
        else:
            if stats is not None:
                stats.heuristic += 1
            pop, _ = queue.pop()
            q_pop = tree_i.states[pop]
            best = _best_towards_root(q_pop, tree_j, params.h_r)
            q = monte_carlo_expand(tree_i, pop, tree_j.states[best], params.n_exp, ctx)
    else:
        if stats is not None:
            stats.random += 1
        q = monte_carlo_expand(tree_i, near, q_rand, 1, ctx)
    if q is None:
        return None
    q_new = tree_i.states[q]
    queue.push(q, heuristic_value(q_new, tree_j))
    if dist2d(q_new, target_j) <= params.R_f:
        return tree_i.path_to(q)
    return None


def _best_towards_root(q_pop, tree_j: Tree, h_r: float) -> int:
    candidates = tree_j.index.within_radius(q_pop, h_r)
    if not candidates:
        # nothing in range: fall back to the nearest node, as used for the queue value
        return tree_j.nearest(q_pop)
    ids = np.asarray(candidates, dtype=np.int64)
    xy = tree_j.index.positions()[ids]
    dx = xy[:, 0] - q_pop[0]
    dy = xy[:, 1] - q_pop[1]
    v = np.sqrt(dx * dx + dy * dy) + tree_j.costs()[ids]
    tied = ids[v == v.min()]
    return int(tied.min())


@dataclass
class Forest:
    trees: List[Tree]
    trajectories: Dict[Tuple[int, int], Trajectory]
    rounds: int
    stats: ExpandStats

    @property
    def n(self) -> int:
        return len(self.trees)


def build_forest(world: World, model: MotionModel, targets: Sequence, params: PlannerParams,
                 rng: np.random.Generator, deadline: Deadline = NO_DEADLINE,
                 roots: Optional[Sequence[np.ndarray]] = None) -> Forest:
    """Grow trees at all targets until every pair is connected.

    Raises ForestTimeout when ``params.pair_iteration_cap`` rounds pass first.
    """
    n = len(targets)
    if n < 2:
        raise ValueError("need at least two targets")
    ctx = Context(world, model, rng, params.t_max, deadline)
    if roots is None:
        roots = [root_config(model, world, r, rng) for r in targets]
    trees = [Tree(q, i) for i, q in enumerate(roots)]
    queues = {(i, j): HeuristicQueue() for i in range(n) for j in range(i + 1, n)}
    unsolved = sorted(queues)
    trajectories: Dict[Tuple[int, int], Trajectory] = {}
    stats = ExpandStats()
    rounds = 0
    while unsolved:
        if rounds >= params.pair_iteration_cap:
            raise ForestTimeout(unsolved, rounds)
        if rounds % 64 == 0:
            deadline.check()
        k = int(rng.integers(len(unsolved)))
        i, j = unsolved[k]
        tau = expand_trees(trees[i], trees[j], queues[(i, j)], targets[j], params, ctx, stats)
        rounds += 1
        if tau is not None:
            trajectories[(i, j)] = tau
            trajectories[(j, i)] = tau
            unsolved.pop(k)
    return Forest(trees, trajectories, rounds, stats)


def check_tree(tree: Tree, world: World, tol: float = 1e-9) -> List[str]:
    """Structural problems of a tree (empty when well formed)."""
    problems = []
    if tree.cost[0] != 0.0 or tree.parent[0] != -1:
        problems.append("root malformed")
    for nid in range(1, len(tree)):
        par = tree.parent[nid]
        if not 0 <= par < nid:
            problems.append(f"node {nid}: parent {par} breaks insertion order")
            continue
        seg = tree.inbound[nid]
        if not np.array_equal(seg.start, tree.states[par]) or not np.array_equal(seg.end, tree.states[nid]):
            problems.append(f"node {nid}: inbound rollout detached")
        expect = tree.cost[par] + trajectory_length(seg.states)
        if abs(expect - tree.cost[nid]) > tol * max(1.0, expect):
            problems.append(f"node {nid}: cost {tree.cost[nid]} != {expect}")
        if world.segment_collides(seg.states):
            problems.append(f"node {nid}: inbound rollout collides")
    return problems
