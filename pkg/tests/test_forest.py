import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from krrf import forest as F
from krrf.forest import (Context, ExpandStats, ForestTimeout, HeuristicQueue, PlannerParams, Tree, build_forest,
                         check_tree, dist2d, expand_trees, heuristic_value, monte_carlo_expand, root_config)
from krrf.geom2d import Footprint, World
from krrf.io import load_scenario
from krrf.models import CarModel, Segment, replay, sample_durations

from conftest import ring
from oracles import queue_fuzz


def _ctx(world, model, seed=0):
    return Context(world, model, np.random.default_rng(seed), 1.5)


# queue ------------------------------------------------------------------------

def test_queue_basic():
    q = HeuristicQueue()
    assert q.push(3, 10.0)
    assert not q.push(3, 12.0)
    assert q.get(3) == 10.0
    assert q.push(3, 4.0)
    q.push(1, 4.0)
    q.push(2, 7.0)
    assert len(q) == 3
    assert q.pop() == (1, 4.0)
    assert q.pop() == (3, 4.0)
    assert q.pop() == (2, 7.0)
    with pytest.raises(IndexError):
        q.pop()


def test_queue_equal_value_is_not_an_update():
    q = HeuristicQueue()
    q.push(0, 5.0)
    assert not q.push(0, 5.0)
    assert q.pop() == (0, 5.0)
    assert len(q) == 0


@given(st.integers(0, 2**32 - 1))
def test_queue_fuzz(seed):
    assert queue_fuzz(np.random.default_rng(seed), 500) == []


# heuristic ------------------------------------------------------------------

def _random_tree(rng, model, n):
    tree = Tree(model.make_config(*rng.uniform(100, 500, 2), rng.uniform(-math.pi, math.pi)))
    for _ in range(n - 1):
        parent = int(rng.integers(len(tree)))
        u = model.sample_control(rng)
        t = float(rng.uniform(0.05, 1.5))
        tree.add(parent, Segment(u, t, model.integrate(tree.states[parent], u, t)))
    return tree


def test_heuristic_root_only(car):
    tree = Tree(car.make_config(100.0, 100.0, 0.0))
    assert heuristic_value((130.0, 100.0), tree) == 30.0


def test_heuristic_far_node_changes_nothing(car):
    tree = Tree(car.make_config(100.0, 100.0, 0.0))
    before = heuristic_value((110.0, 100.0), tree)
    u = (50.0, 0.0)
    tree.add(0, Segment(np.array(u), 1.0, car.integrate(tree.root, u, 1.0)))  # ends at x=150
    tree.add(1, Segment(np.array(u), 1.5, car.integrate(tree.states[1], u, 1.5)))  # ends at x=225
    assert tree.nearest((110.0, 100.0)) == 0
    assert heuristic_value((110.0, 100.0), tree) == before == 10.0


@pytest.mark.parametrize("seed", range(20))
def test_heuristic_matches_recomputation(seed, car):
    rng = np.random.default_rng(seed)
    tree = _random_tree(rng, car, int(rng.integers(1, 300)))
    xy = np.array([s[:2] for s in tree.states])
    cost = np.array(tree.cost)
    for q in rng.uniform(0, 600, size=(50, 2)):
        d = np.hypot(xy[:, 0] - q[0], xy[:, 1] - q[1])
        nearest = int(np.flatnonzero(d == d.min()).min())
        got = heuristic_value(q, tree)
        assert abs(got - (d[nearest] + cost[nearest])) <= 1e-9
        assert (d + cost).min() <= got + 1e-12


def test_heuristic_arithmetic_example(car):
    tree = Tree(car.make_config(0.0, 0.0, 0.0))
    u = np.array([12.0, 0.0])
    tree.add(0, Segment(u, 1.0, car.integrate(tree.root, u, 1.0)))  # node 1 at (12, 0), cost 12
    # the query is nearer to node 1 (distance 5) than to the root
    assert heuristic_value((12.0, 5.0), tree) == pytest.approx(17.0, abs=1e-12)


# Monte Carlo expansion -------------------------------------------------------

def test_expand_single_trial_open_space(car, open_world):
    tree = Tree(car.make_config(300.0, 300.0, 0.0))
    ctx = _ctx(open_world, car, seed=4)
    nid = monte_carlo_expand(tree, 0, (400.0, 300.0), 1, ctx)
    rng = np.random.default_rng(4)
    u = car.sample_controls(rng, 1)[0]
    t = sample_durations(rng, 1.5, 1)[0]
    assert nid == 1
    assert np.array_equal(tree.states[1], car.integrate(tree.root, u, t)[-1])
    assert tree.cost[1] == pytest.approx(tree.inbound[1].length, abs=1e-12)


def test_expand_enclosed_returns_none(car, fp):
    # clearance 5e-5: any motion or turn worth a sampled control touches a wall
    walls = ring(300.0, 300.0, 10.00005, 20.0)
    w = World((0.0, 0.0, 600.0, 600.0), tuple(walls), Footprint(10.0, 10.0))
    tree = Tree(car.make_config(300.0, 300.0, 0.0))
    for seed in range(20):
        assert monte_carlo_expand(tree, 0, (500.0, 500.0), 10, _ctx(w, car, seed)) is None
    assert len(tree) == 1


@pytest.mark.parametrize("seed", range(10))
def test_expand_picks_closest_of_replayed_trials(seed, car, diff, open_world):
    for model in (car, diff):
        tree = Tree(model.make_config(300.0, 300.0, 0.5))
        target = (250.0, 380.0)
        nid = monte_carlo_expand(tree, 0, target, 10, _ctx(open_world, model, seed))
        rng = np.random.default_rng(seed)
        controls = model.sample_controls(rng, 10)
        durations = sample_durations(rng, 1.5, 10)
        ends = [model.integrate(tree.root, u, t)[-1] for u, t in zip(controls, durations)]
        d = [dist2d(e, target) for e in ends]
        assert dist2d(tree.states[nid], target) <= min(d)
        assert np.array_equal(tree.states[nid], ends[int(np.argmin(d))])


def test_expand_skips_colliding_trials(car, fp):
    # a wall right in front: only rollouts that stay short or turn away survive
    w = World((0.0, 0.0, 600.0, 600.0), tuple(ring(300.0, 300.0, 60.0, 10.0)), Footprint(10.0, 10.0))
    tree = Tree(car.make_config(300.0, 300.0, 0.0))
    ctx = _ctx(w, car, 1)
    for _ in range(200):
        nid = monte_carlo_expand(tree, int(ctx.rng.integers(len(tree))), (500.0, 300.0), 10, ctx)
        if nid is not None:
            assert not w.segment_collides(tree.inbound[nid].states)


# one round ------------------------------------------------------------------

def _pair(world, model, a, b, seed):
    rng = np.random.default_rng(seed)
    ti = Tree(root_config(model, world, a, rng), 0)
    tj = Tree(root_config(model, world, b, rng), 1)
    return ti, tj, Context(world, model, rng, 1.5)


def test_expand_trees_open_room_connects(car, open_world):
    for seed in range(5):
        ti, tj, ctx = _pair(open_world, car, (100.0, 100.0), (450.0, 400.0), seed)
        q = HeuristicQueue()
        params = PlannerParams()
        for _ in range(20_000):
            tau = expand_trees(ti, tj, q, (450.0, 400.0), params, ctx)
            if tau is not None:
                break
        assert tau is not None
        assert dist2d(tau.end, (450.0, 400.0)) <= 50.0
        assert np.array_equal(tau.start, ti.root)
        assert tau.is_chained()
        assert not any(open_world.segment_collides(s.states) for s in tau.segments)


def test_gamma_zero_takes_random_branch(car, open_world):
    ti, tj, ctx = _pair(open_world, car, (100.0, 100.0), (500.0, 500.0), 0)
    stats = ExpandStats()
    params = PlannerParams(gamma=0.0, R_f=1e-6)
    q = HeuristicQueue()
    for _ in range(1000):
        expand_trees(ti, tj, q, (500.0, 500.0), params, ctx, stats)
    assert (stats.random, stats.heuristic, stats.forward) == (1000, 0, 0)


def test_gamma_one_never_random(car, open_world):
    ti, tj, ctx = _pair(open_world, car, (100.0, 100.0), (500.0, 500.0), 0)
    stats = ExpandStats()
    params = PlannerParams(gamma=1.0, R_f=1e-6)
    q = HeuristicQueue()
    for _ in range(500):
        expand_trees(ti, tj, q, (500.0, 500.0), params, ctx, stats)
    assert stats.random == 0 and stats.heuristic + stats.forward == 500 and stats.heuristic > 0


class RecordingQueue(HeuristicQueue):
    def __init__(self):
        super().__init__()
        self.log = []

    def push(self, node_id, p):
        self.log.append((node_id, p))
        return super().push(node_id, p)


def test_step_two_pushes_nearest_plus_cost(car, open_world):
    ti, tj, ctx = _pair(open_world, car, (100.0, 100.0), (500.0, 500.0), 3)
    params = PlannerParams(R_f=1e-6)
    q = RecordingQueue()
    checked = 0
    for _ in range(300):
        n_j = len(tj)
        snapshot = [s.copy() for s in ti.states]
        q.log.clear()
        expand_trees(ti, tj, q, (500.0, 500.0), params, ctx)
        if len(tj) > n_j and q.log:
            node, p = q.log[0]
            q_new = tj.states[-1]
            d = [dist2d(s, q_new) for s in snapshot]
            expect = min(range(len(d)), key=lambda k: (d[k], k))
            assert node == expect
            assert abs(p - (d[expect] + tj.cost[-1])) <= 1e-9
            checked += 1
    assert checked > 100


def test_best_towards_root_prefers_low_total(car):
    tj = Tree(car.make_config(0.0, 0.0, 0.0))
    u = np.array([40.0, 0.0])
    tj.add(0, Segment(u, 1.0, car.integrate(tj.root, u, 1.0)))  # (40, 0), cost 40
    # from (20, 0) the root scores 20 + 0, node 1 scores 20 + 40
    assert F._best_towards_root(np.array([20.0, 0.0, 0.0]), tj, 50.0) == 0
    # out of range of everything: nearest node
    assert F._best_towards_root(np.array([200.0, 0.0, 0.0]), tj, 50.0) == 1


def test_tree_well_formed_every_round():
    sc = load_scenario("potholes_s_5")
    world, model = sc.world(), sc.make_model()
    ti, tj, ctx = _pair(world, model, sc.targets[0], sc.targets[3], 2)
    q = HeuristicQueue()
    params = PlannerParams(R_f=1e-6)
    for _ in range(150):
        expand_trees(ti, tj, q, sc.targets[3], params, ctx)
        assert check_tree(ti, world) == [] and check_tree(tj, world) == []
        assert all(ti.parent[k] < k for k in range(1, len(ti)))
        assert len(set(q.items())) == len(q)


# whole forest ------------------------------------------------------------------

def test_two_targets_share_one_trajectory(car, open_world):
    f = build_forest(open_world, car, [(100.0, 100.0), (400.0, 450.0)], PlannerParams(), np.random.default_rng(0))
    assert f.trajectories[(0, 1)] is f.trajectories[(1, 0)]
    assert set(f.trajectories) == {(0, 1), (1, 0)}


def test_sealed_target_times_out(car):
    w = World((0.0, 0.0, 600.0, 600.0), tuple(ring(450.0, 450.0, 40.0, 10.0)), Footprint(10.0, 10.0))
    targets = [(100.0, 100.0), (100.0, 500.0), (450.0, 450.0)]
    with pytest.raises(ForestTimeout) as err:
        build_forest(w, car, targets, PlannerParams(pair_iteration_cap=3000), np.random.default_rng(0))
    assert {(0, 2), (1, 2)} <= set(err.value.unsolved)
    assert all(2 in pair for pair in err.value.unsolved)
    assert err.value.rounds == 3000


def test_deadline_stops_forest(car):
    w = World((0.0, 0.0, 600.0, 600.0), tuple(ring(450.0, 450.0, 40.0, 10.0)), Footprint(10.0, 10.0))
    with pytest.raises(F.PlanTimeout):
        build_forest(w, car, [(100.0, 100.0), (450.0, 450.0)], PlannerParams(), np.random.default_rng(0),
                     F.Deadline(0.05))


@pytest.fixture(scope="module")
def potholes_forest():
    sc = load_scenario("potholes_s_5")
    world, model = sc.world(), sc.make_model()
    f = build_forest(world, model, sc.targets, sc.planner_params(), np.random.default_rng(sc.seed))
    return sc, world, model, f


def test_potholes_forest_complete(potholes_forest):
    sc, world, model, f = potholes_forest
    n = len(sc.targets)
    assert set(f.trajectories) == {(i, j) for i in range(n) for j in range(n) if i != j}
    for (i, j), tau in f.trajectories.items():
        lo, hi = min(i, j), max(i, j)
        assert np.array_equal(tau.start, f.trees[lo].root)
        assert dist2d(tau.start, sc.targets[lo]) == 0.0
        assert dist2d(tau.end, sc.targets[hi]) <= 50.0
        assert not any(world.segment_collides(s.states) for s in tau.segments)


def test_forest_trajectories_replay(potholes_forest):
    sc, world, model, f = potholes_forest
    for tau in f.trajectories.values():
        chain = replay(model, tau.start, tau.controls())
        assert dist2d(chain[-1][-1], tau.end) <= 1e-6
        assert tau.is_chained()


def test_forest_trees_well_formed(potholes_forest):
    sc, world, model, f = potholes_forest
    for tree in f.trees:
        assert check_tree(tree, world) == []


def test_solved_pairs_are_never_expanded_again(monkeypatch):
    sc = load_scenario("potholes_s_5")
    calls = []
    real = F.expand_trees

    def spy(ti, tj, *a, **kw):
        tau = real(ti, tj, *a, **kw)
        calls.append(((ti.root_target, tj.root_target), tau is not None))
        return tau

    monkeypatch.setattr(F, "expand_trees", spy)
    f = F.build_forest(sc.world(), sc.make_model(), sc.targets, sc.planner_params(), np.random.default_rng(1))
    solved = set()
    for pair, ok in calls:
        assert pair not in solved and pair[0] < pair[1]
        if ok:
            solved.add(pair)
    assert len(solved) == 10 and f.rounds == len(calls)


def test_forest_deterministic():
    sc = load_scenario("bugtrap_s_5").with_(targets=load_scenario("bugtrap_s_5").targets[:3])
    runs = []
    for _ in range(2):
        f = build_forest(sc.world(), sc.make_model(), sc.targets, sc.planner_params(), np.random.default_rng(5))
        runs.append((f.rounds, {k: v.total_length for k, v in f.trajectories.items()}, [len(t) for t in f.trees]))
    assert runs[0] == runs[1]


def test_params_validation():
    with pytest.raises(ValueError):
        PlannerParams(gamma=1.5)
    with pytest.raises(ValueError):
        PlannerParams(R_f=0.0)
    with pytest.raises(ValueError):
        build_forest(None, CarModel(), [(0.0, 0.0)], PlannerParams(), np.random.default_rng(0))
