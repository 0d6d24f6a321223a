import math

import numpy as np
import pytest

from krrf.forest import PlannerParams, build_forest, dist2d, root_config
from krrf.geom2d import Footprint, World
from krrf.guide import (GuideParams, GuideStats, Leg, MultiGoalTrajectory, ReconstructFailure, guided_segment,
                        reconstruct, validate, waypoints)
from krrf.io import load_scenario
from krrf.models import Segment, Trajectory, trajectory_length
from krrf.planner import krrf_plan

from conftest import ring, square


def straight_guide(model, a, b, n=40):
    xs = np.linspace(a[0], b[0], n)
    ys = np.linspace(a[1], b[1], n)
    return np.column_stack([xs, ys, np.full(n, math.atan2(b[1] - a[1], b[0] - a[0]))])


def line_trajectory(a, b, n=101):
    states = np.column_stack([np.linspace(a[0], b[0], n), np.linspace(a[1], b[1], n), np.zeros(n)])
    return Trajectory([Segment(np.array([1.0, 0.0]), 1.0, states)])


def test_waypoints_spacing_and_ends():
    tau = line_trajectory((0.0, 0.0), (100.0, 0.0))
    wp = waypoints(tau, 25.0)
    assert wp[0, 0] == 0.0 and wp[-1, 0] == 100.0
    assert np.allclose(np.diff(wp[:, 0]), 25.0)
    back = waypoints(tau, 25.0, reverse=True)
    assert back[0, 0] == 100.0 and back[-1, 0] == 0.0


def test_guided_segment_open_space(car, open_world):
    start, goal = (80.0, 80.0), (500.0, 420.0)
    guide = straight_guide(car, start, goal)
    params = GuideParams(k=5000)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        q0 = car.make_config(*start, math.atan2(goal[1] - start[1], goal[0] - start[0]))
        tau, iters = guided_segment(open_world, car, q0, guide, goal, params, rng)
        assert tau is not None and iters <= params.k
        assert dist2d(tau.end, goal) <= params.R_f
        assert np.array_equal(tau.start, q0) and tau.is_chained()
        assert not any(open_world.segment_collides(s.states) for s in tau.segments)


def test_xi_zero_is_uniform_rrt(car, open_world):
    stats = GuideStats()
    guide = straight_guide(car, (80.0, 80.0), (500.0, 420.0))
    q0 = car.make_config(80.0, 80.0, 0.0)
    tau, iters = guided_segment(open_world, car, q0, guide, (500.0, 420.0), GuideParams(xi=0.0, k=300),
                                np.random.default_rng(0), stats=stats)
    assert stats.guided == 0 and stats.uniform == iters


def test_xi_one_is_fully_guided(car, open_world):
    stats = GuideStats()
    guide = straight_guide(car, (80.0, 80.0), (500.0, 420.0))
    q0 = car.make_config(80.0, 80.0, 0.0)
    _, iters = guided_segment(open_world, car, q0, guide, (500.0, 420.0), GuideParams(xi=1.0, k=300),
                              np.random.default_rng(0), stats=stats)
    assert stats.uniform == 0 and stats.guided == iters


def test_k_one_out_of_reach(car, open_world):
    guide = straight_guide(car, (50.0, 50.0), (550.0, 550.0))
    q0 = car.make_config(50.0, 50.0, 0.0)
    tau, iters = guided_segment(open_world, car, q0, guide, (550.0, 550.0), GuideParams(k=1),
                                np.random.default_rng(0))
    assert tau is None and iters == 1


@pytest.mark.parametrize("seed", range(5))
def test_waypoint_index_non_decreasing(seed, car):
    sc = load_scenario("bugtrap_s_5")
    world = sc.world()
    stats = GuideStats()
    a, b = sc.targets[0], sc.targets[1]
    rng = np.random.default_rng(seed)
    q0 = root_config(car, world, a, rng)
    f = build_forest(world, car, [a, b], PlannerParams(), rng)
    guide = waypoints(f.trajectories[(0, 1)], 25.0)
    guided_segment(world, car, q0, guide, b, GuideParams(k=3000), rng, stats=stats)
    trace = stats.waypoint_trace
    assert all(x <= y for x, y in zip(trace, trace[1:]))
    assert all(0 <= x < len(guide) for x in trace)


def _two_target_forest(world, model, targets, seed):
    return build_forest(world, model, targets, PlannerParams(), np.random.default_rng(seed))


def test_reconstruct_two_targets(car, open_world):
    targets = [(100.0, 100.0), (450.0, 380.0)]
    f = _two_target_forest(open_world, car, targets, 0)
    rng = np.random.default_rng(0)
    mgt = reconstruct(open_world, car, targets, (0, 1), f.trajectories, GuideParams(), rng)
    assert len(mgt.legs) == 2 and [leg.target for leg in mgt.legs] == [1, 0]
    assert np.array_equal(mgt.legs[0].trajectory.end, mgt.legs[1].trajectory.start)
    assert validate(mgt, open_world, car, targets, (0, 1), 50.0) == []


def test_reconstruct_budget_exhausted(car, open_world):
    targets = [(100.0, 100.0), (450.0, 450.0)]
    f = _two_target_forest(open_world, car, targets, 1)
    sealed = World(open_world.bounds, tuple(ring(450.0, 450.0, 40.0, 10.0)), open_world.footprint)
    q0 = car.make_config(100.0, 100.0, 0.0)
    with pytest.raises(ReconstructFailure) as err:
        reconstruct(sealed, car, targets, (0, 1), f.trajectories, GuideParams(k=200, A_max=1),
                    np.random.default_rng(0), q_start=q0)
    assert err.value.completed == 0 and err.value.attempts == 1


def test_reconstruct_retries_up_to_budget(car, open_world, monkeypatch):
    from krrf import guide as G
    targets = [(100.0, 100.0), (450.0, 450.0)]
    f = _two_target_forest(open_world, car, targets, 1)
    calls = []
    real = G.guided_segment

    def flaky(world, model, q_start, *a, **kw):
        calls.append(np.array(q_start))
        if len(calls) <= 3:
            return None, 0
        return real(world, model, q_start, *a, **kw)

    monkeypatch.setattr(G, "guided_segment", flaky)
    q0 = car.make_config(100.0, 100.0, 0.0)
    mgt = G.reconstruct(open_world, car, targets, (0, 1), f.trajectories, GuideParams(A_max=4),
                        np.random.default_rng(0), q_start=q0)
    assert all(np.array_equal(c, q0) for c in calls[:4])
    assert mgt.legs[0].attempts == 4 and mgt.legs[1].attempts == 1
    calls.clear()
    with pytest.raises(ReconstructFailure):
        G.reconstruct(open_world, car, targets, (0, 1), f.trajectories, GuideParams(A_max=3),
                      np.random.default_rng(0), q_start=q0)


@pytest.fixture(scope="module")
def potholes_plan():
    sc = load_scenario("potholes_s_5")
    world, model = sc.world(), sc.make_model()
    res = krrf_plan(world, model, sc.targets, sc.planner_params(), sc.guide_params(), np.random.default_rng(3))
    return sc, world, model, res


def test_potholes_reconstruction_valid(potholes_plan):
    sc, world, model, res = potholes_plan
    mgt = res.trajectory
    assert validate(mgt, world, model, sc.targets, res.tour.order, 50.0) == []
    assert len(mgt.legs) == len(sc.targets)
    assert mgt.cost == pytest.approx(sum(trajectory_length(s.states) for t in mgt.segments for s in t.segments),
                                     rel=1e-9)


def test_cost_additive(potholes_plan):
    mgt = potholes_plan[3].trajectory
    assert abs(mgt.cost - math.fsum(t.total_length for t in mgt.segments)) <= 1e-9 * mgt.cost


def test_empty_world_succeeds_where_obstacles_did(potholes_plan):
    sc, world, model, res = potholes_plan
    empty = world.with_obstacles(())
    mgt = reconstruct(empty, model, sc.targets, res.tour.order, res.forest.trajectories, sc.guide_params(),
                      np.random.default_rng(3), q_start=res.trajectory.legs[0].trajectory.start)
    assert len(mgt.legs) == len(sc.targets)
    assert validate(mgt, empty, model, sc.targets, res.tour.order, 50.0) == []


def _copy(mgt):
    legs = [Leg(Trajectory([Segment(s.control.copy(), s.duration, s.states.copy()) for s in leg.trajectory.segments]),
                leg.target, leg.iterations, leg.attempts) for leg in mgt.legs]
    return MultiGoalTrajectory(mgt.order, legs)


def _kinds(problems):
    return {p.kind for p in problems}


def test_validate_flags_teleport(potholes_plan):
    sc, world, model, res = potholes_plan
    bad = _copy(res.trajectory)
    seg = bad.legs[1].trajectory.segments[0]
    k = len(seg.states) // 2
    seg.states[k, 0] += 10.0
    assert _kinds(validate(bad, world, model, sc.targets, res.tour.order, 50.0)) & {"continuity", "collision"}
    bad = _copy(res.trajectory)
    bad.legs[1].trajectory.segments[0].states[0, 0] += 10.0  # junction broken
    assert "junction" in _kinds(validate(bad, world, model, sc.targets, res.tour.order, 50.0))


def test_validate_flags_collision(potholes_plan):
    sc, world, model, res = potholes_plan
    bad = _copy(res.trajectory)
    seg = bad.legs[0].trajectory.segments[-1]
    x0, y0, x1, y1 = world.obstacles[12].bbox()
    seg.states[len(seg.states) // 2, :2] = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    assert "collision" in _kinds(validate(bad, world, model, sc.targets, res.tour.order, 50.0))


def test_validate_flags_wrong_order_and_missing_target(potholes_plan):
    sc, world, model, res = potholes_plan
    order = res.tour.order
    swapped = (order[0],) + tuple(reversed(order[1:]))
    assert _kinds(validate(res.trajectory, world, model, sc.targets, swapped, 50.0)) >= {"order", "target"}
    short = _copy(res.trajectory)
    short.legs.pop()
    assert "legs" in _kinds(validate(short, world, model, sc.targets, order, 50.0))


def test_validate_flags_inadmissible_control(potholes_plan):
    sc, world, model, res = potholes_plan
    bad = _copy(res.trajectory)
    bad.legs[0].trajectory.segments[0].control[0] = 80.0
    assert "control" in _kinds(validate(bad, world, model, sc.targets, res.tour.order, 50.0))


def test_guide_params_validation():
    with pytest.raises(ValueError):
        GuideParams(xi=1.2)
    with pytest.raises(ValueError):
        GuideParams(A_max=0)
    assert GuideParams().attempts(5) == 25
    assert GuideParams(A_max=3).attempts(5) == 3
