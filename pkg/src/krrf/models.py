"""Forward kinodynamic models and fixed-step rollouts.

A configuration is a flat float64 array ``[x, y, theta, *aux]``. Car, Dubins
and differential drive have no aux states; the bicycle carries
``[u, v, omega]`` (longitudinal, lateral and angular velocity).

Continuous models are integrated with RK4 using equal substeps no longer than
``dt``; the bicycle applies its discrete update with its own step ``ts``.
Heading is wrapped to (-pi, pi] after every step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numba
import numpy as np

from .geom2d import _first_collision

TWO_PI = 2.0 * math.pi


class DegenerateDynamics(ArithmeticError):
    """A bicycle-model denominator vanished."""


@numba.njit(cache=True)
def wrap_angle(th):
    if -math.pi < th <= math.pi:
        return th
    th = th - 2.0 * math.pi * math.ceil((th - math.pi) / (2.0 * math.pi))
    if th <= -math.pi:
        th += 2.0 * math.pi
    elif th > math.pi:
        th -= 2.0 * math.pi
    return th


@numba.njit(cache=True)
def _n_steps(t, dt):
    n = int(math.ceil(t / dt - 1e-9))
    return max(n, 1)


@numba.njit(cache=True)
def _car_rollout(x, y, th, us, phi, wheelbase, t, dt):
    n = _n_steps(t, dt)
    h = t / n
    out = np.empty((n + 1, 3))
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = th
    w = us / wheelbase * math.tan(phi)
    for i in range(n):
        # RK4 on (us cos th, us sin th, w); w is constant
        th2 = th + 0.5 * h * w
        th4 = th + h * w
        c1 = math.cos(th)
        s1 = math.sin(th)
        c2 = math.cos(th2)
        s2 = math.sin(th2)
        c4 = math.cos(th4)
        s4 = math.sin(th4)
        x += h / 6.0 * us * (c1 + 4.0 * c2 + c4)
        y += h / 6.0 * us * (s1 + 4.0 * s2 + s4)
        th = wrap_angle(th4)
        out[i + 1, 0] = x
        out[i + 1, 1] = y
        out[i + 1, 2] = th
    return out


@numba.njit(cache=True)
def _diff_rollout(x, y, th, ul, ur, radius, track, t, dt):
    v = 0.5 * radius * (ul + ur)
    w = radius / track * (ur - ul)
    # same ODE shape as the car with speed v and yaw rate w
    n = _n_steps(t, dt)
    h = t / n
    out = np.empty((n + 1, 3))
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = th
    for i in range(n):
        th2 = th + 0.5 * h * w
        th4 = th + h * w
        x += h / 6.0 * v * (math.cos(th) + 4.0 * math.cos(th2) + math.cos(th4))
        y += h / 6.0 * v * (math.sin(th) + 4.0 * math.sin(th2) + math.sin(th4))
        th = wrap_angle(th4)
        out[i + 1, 0] = x
        out[i + 1, 1] = y
        out[i + 1, 2] = th
    return out


@numba.njit(cache=True)
def _bike_step(state, a, delta, ts, m, lf, lr, kf, kr, iz, u_min, u_lo, u_hi, eps_den, out):
    """One discrete bicycle update; returns False on a vanishing denominator."""
    x = state[0]
    y = state[1]
    th = state[2]
    u = state[3]
    v = state[4]
    w = state[5]
    c = math.cos(th)
    s = math.sin(th)
    uc = max(u, u_min)
    den_v = m * uc - ts * (kf + kr)
    den_w = iz * uc - ts * (lf * lf * kf + lr * lr * kr)
    if abs(den_v) < eps_den or abs(den_w) < eps_den:
        return False
    out[0] = x + ts * (u * c - v * s)
    out[1] = y + ts * (v * c + u * s)
    out[2] = wrap_angle(th + ts * w)
    out[3] = min(max(u + ts * a, u_lo), u_hi)
    out[4] = (m * uc * v + ts * (lf * kf - lr * kr) * w - ts * kf * delta * uc - ts * m * uc * uc * w) / den_v
    out[5] = (iz * uc * w + ts * (lf * kf - lr * kr) * v - ts * lf * kf * delta * uc) / den_w
    return True


@numba.njit(cache=True)
def _bike_rollout(q, a, delta, t, ts, m, lf, lr, kf, kr, iz, u_min, u_lo, u_hi, eps_den):
    n = _n_steps(t, ts)
    out = np.empty((n + 1, 6))
    out[0, :] = q[:6]
    for i in range(n):
        if not _bike_step(out[i], a, delta, ts, m, lf, lr, kf, kr, iz, u_min, u_lo, u_hi, eps_den, out[i + 1]):
            return out[: i + 1], False
    return out, True


# Batched Monte Carlo trials: roll out every (control, duration) pair from q and
# return the index of the collision-free endpoint closest to (tx, ty), -1 if
# all collide, -2 on degenerate bicycle dynamics.


@numba.njit(cache=True)
def _car_best(q, controls, durations, wheelbase, dt, tx, ty, hl, hw, bounds, verts, starts, aabbs):
    best = -1
    best_d = np.inf
    for k in range(controls.shape[0]):
        states = _car_rollout(q[0], q[1], q[2], controls[k, 0], controls[k, 1], wheelbase, durations[k], dt)
        if _first_collision(states, hl, hw, bounds, verts, starts, aabbs) >= 0:
            continue
        dx = states[-1, 0] - tx
        dy = states[-1, 1] - ty
        d = math.sqrt(dx * dx + dy * dy)
        if d < best_d:
            best_d = d
            best = k
    return best


@numba.njit(cache=True)
def _diff_best(q, controls, durations, radius, track, dt, tx, ty, hl, hw, bounds, verts, starts, aabbs):
    best = -1
    best_d = np.inf
    for k in range(controls.shape[0]):
        states = _diff_rollout(q[0], q[1], q[2], controls[k, 0], controls[k, 1], radius, track, durations[k], dt)
        if _first_collision(states, hl, hw, bounds, verts, starts, aabbs) >= 0:
            continue
        dx = states[-1, 0] - tx
        dy = states[-1, 1] - ty
        d = math.sqrt(dx * dx + dy * dy)
        if d < best_d:
            best_d = d
            best = k
    return best


@numba.njit(cache=True)
def _bike_best(q, controls, durations, ts, m, lf, lr, kf, kr, iz, u_min, u_lo, u_hi, eps_den, tx, ty,
               hl, hw, bounds, verts, starts, aabbs):
    best = -1
    best_d = np.inf
    for k in range(controls.shape[0]):
        states, ok = _bike_rollout(q, controls[k, 0], controls[k, 1], durations[k], ts, m, lf, lr, kf, kr, iz,
                                   u_min, u_lo, u_hi, eps_den)
        if not ok:
            return -2
        if _first_collision(states, hl, hw, bounds, verts, starts, aabbs) >= 0:
            continue
        dx = states[-1, 0] - tx
        dy = states[-1, 1] - ty
        d = math.sqrt(dx * dx + dy * dy)
        if d < best_d:
            best_d = d
            best = k
    return best


class MotionModel:
    """Common interface: bounds on controls, sampling and rollout."""

    name: str = ""
    state_dim: int = 3
    control_low: np.ndarray
    control_high: np.ndarray

    def sample_control(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.control_low, self.control_high)

    def sample_controls(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` independent uniform controls, one per row."""
        low = self.control_low
        return low + (self.control_high - low) * rng.random((n, low.shape[0]))

    def best_rollout(self, q, controls: np.ndarray, durations: np.ndarray, world, q_to) -> int:
        """Row of the collision-free rollout ending closest to ``q_to``, or -1."""
        raise NotImplementedError

    def admissible(self, u) -> bool:
        u = np.asarray(u, dtype=np.float64)
        return bool(np.all(u >= self.control_low) and np.all(u <= self.control_high))

    def make_config(self, x: float, y: float, theta: float = 0.0, aux: Sequence[float] = ()) -> np.ndarray:
        q = np.zeros(self.state_dim)
        q[0] = x
        q[1] = y
        q[2] = wrap_angle(float(theta))
        if aux:
            q[3:] = aux
        return q

    def integrate(self, q, u, t: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def max_speed(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class CarModel(MotionModel):
    wheelbase: float = 30.0
    speed_max: float = 50.0
    steer_max: float = math.pi / 4
    dt: float = 0.05
    name = "car"

    def __post_init__(self):
        if self.wheelbase <= 0 or self.dt <= 0:
            raise ValueError("wheelbase and dt must be positive")

    @property
    def control_low(self):
        return np.array([0.0, -self.steer_max])

    @property
    def control_high(self):
        return np.array([self.speed_max, self.steer_max])

    @property
    def max_speed(self):
        return self.speed_max

    def integrate(self, q, u, t):
        return _car_rollout(float(q[0]), float(q[1]), float(q[2]), float(u[0]), float(u[1]),
                            self.wheelbase, float(t), self.dt)

    def best_rollout(self, q, controls, durations, world, q_to):
        return int(_car_best(np.asarray(q, dtype=np.float64), controls, durations, self.wheelbase, self.dt,
                             float(q_to[0]), float(q_to[1]), *world.collision_args()))


@dataclass(frozen=True, eq=False)
class DubinsModel(CarModel):
    """Car with the speed input pinned to ``speed``."""

    speed: float = 50.0
    name = "dubins"

    @property
    def control_low(self):
        return np.array([self.speed, -self.steer_max])

    @property
    def control_high(self):
        return np.array([self.speed, self.steer_max])

    @property
    def max_speed(self):
        return self.speed

    def sample_control(self, rng):
        return np.array([self.speed, rng.uniform(-self.steer_max, self.steer_max)])

    def sample_controls(self, rng, n):
        out = np.empty((n, 2))
        out[:, 0] = self.speed
        out[:, 1] = rng.uniform(-self.steer_max, self.steer_max, size=n)
        return out


@dataclass(frozen=True, eq=False)
class DiffDriveModel(MotionModel):
    wheel_radius: float = 20.0
    track: float = 20.0
    wheel_max: float = 2.0
    wheel_min: float = 0.0
    dt: float = 0.05
    name = "diff"

    def __post_init__(self):
        if self.wheel_radius <= 0 or self.track <= 0 or self.dt <= 0:
            raise ValueError("wheel radius, track and dt must be positive")

    @property
    def control_low(self):
        return np.array([self.wheel_min, self.wheel_min])

    @property
    def control_high(self):
        return np.array([self.wheel_max, self.wheel_max])

    @property
    def max_speed(self):
        return self.wheel_radius * max(abs(self.wheel_max), abs(self.wheel_min))

    def integrate(self, q, u, t):
        return _diff_rollout(float(q[0]), float(q[1]), float(q[2]), float(u[0]), float(u[1]),
                             self.wheel_radius, self.track, float(t), self.dt)

    def best_rollout(self, q, controls, durations, world, q_to):
        return int(_diff_best(np.asarray(q, dtype=np.float64), controls, durations, self.wheel_radius, self.track,
                              self.dt, float(q_to[0]), float(q_to[1]), *world.collision_args()))


@dataclass(frozen=True)
class BikeParams:
    """Vehicle constants of the discrete dynamic bicycle model.

    ``kf``/``kr`` are cornering stiffnesses with the sign convention of the
    update equations (negative for a physical tyre).
    """

    m: float
    lf: float
    lr: float
    kf: float
    kr: float
    iz: float

    def __post_init__(self):
        if not (self.m > 0 and self.lf > 0 and self.lr > 0 and self.iz > 0):
            raise ValueError("m, lf, lr and iz must be positive")


# Table 1 of Ge et al., "Numerically stable dynamic bicycle model for discrete-time control"
BIKE_PRESETS = {
    "ge2020": BikeParams(m=1412.0, lf=1.06, lr=1.85, kf=-128916.0, kr=-85944.0, iz=1536.7),
}


@dataclass(frozen=True, eq=False)
class BikeModel(MotionModel):
    params: BikeParams
    ts: float = 0.05
    accel_min: float = -5.0
    accel_max: float = 2.0
    steer_max: float = math.pi / 4
    u_min: float = 0.05
    speed_min: float = 0.0
    speed_max: float = 50.0
    eps_den: float = 1e-9
    name = "bike"
    state_dim = 6

    def __post_init__(self):
        if self.ts <= 0:
            raise ValueError("ts must be positive")

    @property
    def dt(self):
        return self.ts

    @property
    def control_low(self):
        return np.array([self.accel_min, -self.steer_max])

    @property
    def control_high(self):
        return np.array([self.accel_max, self.steer_max])

    @property
    def max_speed(self):
        return self.speed_max

    def _args(self):
        p = self.params
        return (self.ts, p.m, p.lf, p.lr, p.kf, p.kr, p.iz, self.u_min, self.speed_min, self.speed_max, self.eps_den)

    def step(self, q, u) -> np.ndarray:
        out = np.empty(6)
        ok = _bike_step(np.asarray(q, dtype=np.float64), float(u[0]), float(u[1]), *self._args(), out)
        if not ok:
            raise DegenerateDynamics("bicycle denominator below eps_den")
        return out

    def integrate(self, q, u, t):
        states, ok = _bike_rollout(np.asarray(q, dtype=np.float64), float(u[0]), float(u[1]), float(t),
                                   *self._args())
        if not ok:
            raise DegenerateDynamics("bicycle denominator below eps_den")
        return states

    def best_rollout(self, q, controls, durations, world, q_to):
        k = int(_bike_best(np.asarray(q, dtype=np.float64), controls, durations, *self._args(),
                           float(q_to[0]), float(q_to[1]), *world.collision_args()))
        if k == -2:
            raise DegenerateDynamics("bicycle denominator below eps_den")
        return k


MODEL_NAMES = ("car", "diff", "bike", "dubins")


def make_model(name: str, params: dict | None = None, preset: str | None = None) -> MotionModel:
    """Build a model from scenario parameters (unknown keys raise)."""
    params = dict(params or {})
    if name == "car":
        keys = {"L": "wheelbase", "speed_max": "speed_max", "steer_max": "steer_max", "dt": "dt"}
        return CarModel(**_pick(params, keys))
    if name == "dubins":
        keys = {"L": "wheelbase", "u_s": "speed", "steer_max": "steer_max", "dt": "dt"}
        return DubinsModel(**_pick(params, keys))
    if name == "diff":
        keys = {"r": "wheel_radius", "L": "track", "wheel_max": "wheel_max", "wheel_min": "wheel_min", "dt": "dt"}
        return DiffDriveModel(**_pick(params, keys))
    if name == "bike":
        vehicle = {k: params.pop(k) for k in ("m", "lf", "lr", "kf", "kr", "iz") if k in params}
        if preset is not None:
            if preset not in BIKE_PRESETS:
                raise ValueError(f"unknown bike preset {preset!r}")
            base = BIKE_PRESETS[preset].__dict__.copy()
            base.update(vehicle)
            vehicle = base
        missing = {"m", "lf", "lr", "kf", "kr", "iz"} - set(vehicle)
        if missing:
            raise ValueError(f"bike model needs explicit constants: missing {sorted(missing)}")
        keys = {"T_s": "ts", "dt": "ts", "u_min": "u_min", "speed_max": "speed_max", "speed_min": "speed_min",
                "accel_min": "accel_min", "accel_max": "accel_max", "steer_max": "steer_max"}
        return BikeModel(BikeParams(**vehicle), **_pick(params, keys))
    raise ValueError(f"unknown model {name!r}")


def _pick(params: dict, keys: dict) -> dict:
    unknown = set(params) - set(keys)
    if unknown:
        raise ValueError(f"unknown model parameters {sorted(unknown)}")
    return {keys[k]: float(v) for k, v in params.items()}


@numba.njit(cache=True)
def _path_length(states):
    total = 0.0
    for i in range(1, states.shape[0]):
        dx = states[i, 0] - states[i - 1, 0]
        dy = states[i, 1] - states[i - 1, 1]
        total += math.sqrt(dx * dx + dy * dy)
    return total


def trajectory_length(states) -> float:
    """Planar polyline length through the sampled states."""
    return float(_path_length(np.ascontiguousarray(states, dtype=np.float64)))


def sample_duration(rng: np.random.Generator, t_max: float) -> float:
    """Uniform on (0, t_max]."""
    return t_max * (1.0 - rng.random())


def sample_durations(rng: np.random.Generator, t_max: float, n: int) -> np.ndarray:
    return t_max * (1.0 - rng.random(n))


def replay(model: MotionModel, start, controls: List[tuple]) -> List[np.ndarray]:
    """Re-integrate ``(control, duration)`` pairs from ``start``; returns each rollout."""
    q = np.asarray(start, dtype=np.float64)
    out = []
    for u, t in controls:
        states = model.integrate(q, u, t)
        out.append(states)
        q = states[-1]
    return out


@dataclass(frozen=True, eq=False)
class Segment:
    """One constant-control rollout; ``states[0]`` is the start configuration."""

    control: np.ndarray
    duration: float
    states: np.ndarray

    @property
    def start(self) -> np.ndarray:
        return self.states[0]

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    @property
    def length(self) -> float:
        return trajectory_length(self.states)


@dataclass(frozen=True, eq=False)
class Trajectory:
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    def __len__(self):
        return len(self.segments)

    @property
    def start(self) -> np.ndarray:
        return self.segments[0].start

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1].end

    @property
    def total_length(self) -> float:
        return float(sum(s.length for s in self.segments))

    def states(self) -> np.ndarray:
        """All samples, junction states listed once."""
        if not self.segments:
            return np.zeros((0, 3))
        parts = [self.segments[0].states] + [s.states[1:] for s in self.segments[1:]]
        return np.concatenate(parts)

    def controls(self) -> List[tuple]:
        return [(s.control, s.duration) for s in self.segments]

    def is_chained(self) -> bool:
        return all(np.array_equal(a.end, b.start) for a, b in zip(self.segments, self.segments[1:]))
