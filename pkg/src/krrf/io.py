"""Scenario files, bundled maps, CSV trial records and trajectory JSON."""
from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .baseline import LazyParams
from .forest import PlannerParams
from .geom2d import Footprint, World, parse_map
from .guide import GuideParams, Leg, MultiGoalTrajectory
from .models import MotionModel, Segment, Trajectory, make_model

BUNDLED_MAPS = ("potholes_s", "bugtrap_s", "rooms_s", "double_bugtrap_s")


class ScenarioParseError(ValueError):
    pass


PLANNER_KEYS = {"R_f", "h_r", "n_exp", "t_max", "gamma", "pair_iteration_cap"}
GUIDE_KEYS = {"xi", "k", "A_max"}
LAZY_KEYS = {"lazy_iterations", "lazy_goal_bias"}
SCENARIO_KEYS = {"robot_length", "robot_width", "heading"}
INT_KEYS = {"n_exp", "pair_iteration_cap", "k", "A_max", "lazy_iterations"}

# full robot sizes (length along heading, width)
DEFAULT_FOOTPRINT = {"car": (20.0, 20.0), "dubins": (20.0, 20.0), "diff": (20.0, 20.0), "bike": (20.0, 10.0)}


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("krrf") / "data" / name))


def load_map(name_or_path: str, footprint: Footprint, base: Optional[Path] = None) -> World:
    if name_or_path in BUNDLED_MAPS:
        path = bundled_path(name_or_path + ".map")
    else:
        path = Path(name_or_path)
        if not path.is_absolute() and base is not None:
            path = base / path
    return parse_map(path.read_text(), footprint)


@dataclass
class Scenario:
    name: str = "scenario"
    map: str = ""
    model: str = "car"
    preset: Optional[str] = None
    params: Dict[str, float] = field(default_factory=dict)
    targets: List[Tuple[float, float]] = field(default_factory=list)
    seed: int = 0
    time_limit: float = 60.0
    base_dir: Optional[Path] = field(default=None, compare=False)

    def _split(self):
        planner, guide, lazy, model, misc = {}, {}, {}, {}, {}
        for key, val in self.params.items():
            val = int(val) if key in INT_KEYS else float(val)
            if key in PLANNER_KEYS:
                planner[key] = val
            elif key in GUIDE_KEYS:
                guide[key] = val
            elif key in LAZY_KEYS:
                lazy[key] = val
            elif key in SCENARIO_KEYS:
                misc[key] = val
            else:
                model[key] = val
        return planner, guide, lazy, model, misc

    def planner_params(self) -> PlannerParams:
        return PlannerParams(**self._split()[0])

    def guide_params(self) -> GuideParams:
        planner = self.planner_params()
        return GuideParams(R_f=planner.R_f, n_exp=planner.n_exp, t_max=planner.t_max, **self._split()[1])

    def lazy_params(self) -> LazyParams:
        lazy = self._split()[2]
        out = LazyParams()
        if "lazy_iterations" in lazy:
            out.edge_iterations = lazy["lazy_iterations"]
        if "lazy_goal_bias" in lazy:
            out.goal_bias = lazy["lazy_goal_bias"]
        return out

    def make_model(self) -> MotionModel:
        return make_model(self.model, self._split()[3], self.preset)

    def footprint(self) -> Footprint:
        misc = self._split()[4]
        length, width = DEFAULT_FOOTPRINT[self.model]
        return Footprint(0.5 * misc.get("robot_length", length), 0.5 * misc.get("robot_width", width))

    def world(self) -> World:
        return load_map(self.map, self.footprint(), self.base_dir)

    def with_(self, **changes) -> "Scenario":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["params"] = dict(self.params)
        data["targets"] = list(self.targets)
        data.update(changes)
        return Scenario(**data)


def parse_scenario(text: str, base_dir: Optional[Path] = None) -> Scenario:
    sc = Scenario(base_dir=base_dir)
    seen_map = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "name" and len(rest) == 1:
                sc.name = rest[0]
            elif head == "map" and len(rest) == 1:
                sc.map = rest[0]
                seen_map = True
            elif head == "model" and len(rest) in (1, 2):
                sc.model = rest[0]
                sc.preset = rest[1] if len(rest) == 2 else None
            elif head == "param" and len(rest) == 2:
                sc.params[rest[0]] = float(rest[1])
            elif head == "target" and len(rest) == 2:
                sc.targets.append((float(rest[0]), float(rest[1])))
            elif head == "seed" and len(rest) == 1:
                sc.seed = int(rest[0])
            elif head == "time_limit" and len(rest) == 1:
                sc.time_limit = float(rest[0])
            else:
                raise ScenarioParseError(f"line {lineno}: cannot parse {line!r}")
        except ValueError as exc:
            if isinstance(exc, ScenarioParseError):
                raise
            raise ScenarioParseError(f"line {lineno}: {exc}") from None
    if not seen_map:
        raise ScenarioParseError("scenario has no map")
    if sc.model not in DEFAULT_FOOTPRINT:
        raise ScenarioParseError(f"unknown model {sc.model!r}")
    if len(sc.targets) < 2:
        raise ScenarioParseError("scenario needs at least two targets")
    return sc


def format_scenario(sc: Scenario) -> str:
    lines = [f"name {sc.name}", f"map {sc.map}", f"model {sc.model}" + (f" {sc.preset}" if sc.preset else "")]
    lines += [f"param {k} {v!r}" for k, v in sc.params.items()]
    lines += [f"target {x!r} {y!r}" for x, y in sc.targets]
    lines += [f"seed {sc.seed}", f"time_limit {sc.time_limit!r}"]
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    name = str(path)
    if not Path(name).exists() and bundled_path(name + ".scn").exists():
        path = bundled_path(name + ".scn")
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from None
    return parse_scenario(text, path.parent)


def check_scenario(sc: Scenario) -> World:
    """Build the world and verify targets; raises ScenarioParseError on problems."""
    try:
        world = sc.world()
        sc.make_model()
        sc.planner_params()
        sc.guide_params()
    except (OSError, ValueError) as exc:
        raise ScenarioParseError(str(exc)) from None
    for t in sc.targets:
        if not any(not world.config_collides((t[0], t[1], th)) for th in np.linspace(-math.pi, math.pi, 72)):
            raise ScenarioParseError(f"target {t} is in collision")
    return world


# --------------------------------------------------------------------------
# trial records


CSV_COLUMNS = ("scenario", "planner", "seed", "success", "cost", "t_forest", "t_tsp", "t_guide", "t_total",
               "fail_reason")


@dataclass
class TrialRecord:
    scenario: str
    planner: str
    seed: int
    success: bool
    cost: Optional[float]
    t_forest: float
    t_tsp: float
    t_guide: float
    t_total: float
    fail_reason: str = ""

    def outcome(self) -> tuple:
        """Fields that are reproducible from the seed (timings excluded)."""
        return (self.scenario, self.planner, self.seed, self.success, self.cost, self.fail_reason)


def write_records(records: Iterable[TrialRecord], stream) -> None:
    """Write a header plus one row per record; open files with ``newline=""``.

    String fields are always quoted so that a bare carriage return survives.
    """
    stream.write(",".join(CSV_COLUMNS) + "\n")
    w = csv.writer(stream, lineterminator="\n", quoting=csv.QUOTE_NONNUMERIC)
    for r in records:
        if "\0" in r.scenario + r.planner + r.fail_reason:
            raise ValueError("NUL characters cannot be stored in CSV")
        w.writerow([r.scenario, r.planner, int(r.seed), "true" if r.success else "false",
                    "" if r.cost is None else float(r.cost), float(r.t_forest), float(r.t_tsp),
                    float(r.t_guide), float(r.t_total), r.fail_reason])


def read_records(stream) -> List[TrialRecord]:
    rows = list(csv.reader(stream))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        out.append(TrialRecord(row[0], row[1], int(row[2]), row[3] == "true", float(row[4]) if row[4] else None,
                               float(row[5]), float(row[6]), float(row[7]), float(row[8]), row[9]))
    return out


def records_to_csv(records: Iterable[TrialRecord]) -> str:
    buf = _io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


def matrix_to_csv(d: np.ndarray) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in d:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# trajectory JSON; floats survive a round trip exactly


def trajectory_to_json(mgt: MultiGoalTrajectory) -> dict:
    legs = []
    for leg in mgt.legs:
        legs.append({
            "target": leg.target,
            "iterations": leg.iterations,
            "attempts": leg.attempts,
            "segments": [{"control": s.control.tolist(), "duration": s.duration, "states": s.states.tolist()}
                         for s in leg.trajectory.segments],
        })
    return {"order": list(mgt.order), "cost": mgt.cost, "legs": legs}


def trajectory_from_json(data: dict) -> MultiGoalTrajectory:
    legs = []
    for leg in data["legs"]:
        segs = [Segment(np.array(s["control"], dtype=np.float64), float(s["duration"]),
                        np.array(s["states"], dtype=np.float64)) for s in leg["segments"]]
        legs.append(Leg(Trajectory(segs), int(leg["target"]), int(leg.get("iterations", 0)),
                        int(leg.get("attempts", 1))))
    return MultiGoalTrajectory(tuple(int(i) for i in data["order"]), legs)


def save_trajectory(mgt: MultiGoalTrajectory, path) -> None:
    Path(path).write_text(json.dumps(trajectory_to_json(mgt)))


def load_trajectory(path) -> MultiGoalTrajectory:
    return trajectory_from_json(json.loads(Path(path).read_text()))
