"""Planar geometry: polygonal worlds and footprint collision checks.

The robot is an oriented rectangle centred on the configuration position.
Obstacles are simple (possibly non-convex) polygons. Touching counts as
collision everywhere: obstacle boundaries, and the world bounds.

Hot loops live in numba kernels operating on flat arrays; the ``World``
object packs its polygons once at construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numba
import numpy as np

Point2 = Tuple[float, float]


@dataclass(frozen=True)
class Polygon:
    vertices: Tuple[Point2, ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        for x, y in verts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("polygon vertices must be finite")
        if signed_area(verts) < 0.0:
            verts = tuple(reversed(verts))
        object.__setattr__(self, "vertices", verts)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)

    def bbox(self) -> Tuple[float, float, float, float]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class Footprint:
    half_length: float
    half_width: float

    def __post_init__(self):
        if not (self.half_length > 0 and self.half_width > 0):
            raise ValueError("footprint half sizes must be positive")

    @property
    def radius(self) -> float:
        return math.hypot(self.half_length, self.half_width)


def signed_area(vertices: Sequence[Point2]) -> float:
    a = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        a += x0 * y1 - x1 * y0
    return 0.5 * a


# --------------------------------------------------------------------------
# numba kernels


@numba.njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@numba.njit(cache=True)
def _on_segment(ax, ay, bx, by, px, py):
    # assumes collinearity of p with ab
    return (min(ax, bx) <= px <= max(ax, bx)) and (min(ay, by) <= py <= max(ay, by))


@numba.njit(cache=True)
def _segments_intersect(ax, ay, bx, by, cx, cy, dx, dy):
    d1 = _orient(cx, cy, dx, dy, ax, ay)
    d2 = _orient(cx, cy, dx, dy, bx, by)
    d3 = _orient(ax, ay, bx, by, cx, cy)
    d4 = _orient(ax, ay, bx, by, dx, dy)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if d2 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    if d3 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if d4 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    return False


@numba.njit(cache=True)
def _point_in_polygon(px, py, verts, lo, hi):
    """Boundary-inclusive containment for the vertex slice verts[lo:hi]."""
    n = hi - lo
    inside = False
    for k in range(n):
        i = lo + k
        j = lo + (k + 1) % n
        ax = verts[i, 0]
        ay = verts[i, 1]
        bx = verts[j, 0]
        by = verts[j, 1]
        if _orient(ax, ay, bx, by, px, py) == 0 and _on_segment(ax, ay, bx, by, px, py):
            return True
        if (ay > py) != (by > py):
            xc = ax + (py - ay) * (bx - ax) / (by - ay)
            if px < xc:
                inside = not inside
    return inside


@numba.njit(cache=True)
def _config_collides(x, y, th, hl, hw, bounds, verts, starts, aabbs):
    c = math.cos(th)
    s = math.sin(th)
    # corners in CCW order: (+l,+w) (-l,+w) (-l,-w) (+l,-w)
    cx = np.empty(4)
    cy = np.empty(4)
    sl = (1.0, -1.0, -1.0, 1.0)
    sw = (1.0, 1.0, -1.0, -1.0)
    for k in range(4):
        lx = sl[k] * hl
        ly = sw[k] * hw
        cx[k] = x + c * lx - s * ly
        cy[k] = y + s * lx + c * ly
        if cx[k] <= bounds[0] or cx[k] >= bounds[2] or cy[k] <= bounds[1] or cy[k] >= bounds[3]:
            return True
    ex = abs(c) * hl + abs(s) * hw
    ey = abs(s) * hl + abs(c) * hw
    for o in range(aabbs.shape[0]):
        if x + ex < aabbs[o, 0] or x - ex > aabbs[o, 2] or y + ey < aabbs[o, 1] or y - ey > aabbs[o, 3]:
            continue
        lo = starts[o]
        hi = starts[o + 1]
        n = hi - lo
        for e in range(n):
            i = lo + e
            j = lo + (e + 1) % n
            for k in range(4):
                k2 = (k + 1) % 4
                if _segments_intersect(cx[k], cy[k], cx[k2], cy[k2],
                                       verts[i, 0], verts[i, 1], verts[j, 0], verts[j, 1]):
                    return True
        # polygon inside the footprint
        dxv = verts[lo, 0] - x
        dyv = verts[lo, 1] - y
        if abs(c * dxv + s * dyv) <= hl and abs(-s * dxv + c * dyv) <= hw:
            return True
        # footprint inside the polygon
        if _point_in_polygon(x, y, verts, lo, hi):
            return True
    return False


@numba.njit(cache=True)
def _first_collision(states, hl, hw, bounds, verts, starts, aabbs):
    for i in range(states.shape[0]):
        if _config_collides(states[i, 0], states[i, 1], states[i, 2], hl, hw, bounds, verts, starts, aabbs):
            return i
    return -1


# --------------------------------------------------------------------------


def point_in_polygon(p: Point2, poly: Polygon) -> bool:
    verts = poly.array
    return bool(_point_in_polygon(float(p[0]), float(p[1]), verts, 0, verts.shape[0]))


@dataclass(frozen=True)
class World:
    """Axis-aligned bounds ``(xmin, ymin, xmax, ymax)``, obstacles and robot footprint."""

    bounds: Tuple[float, float, float, float]
    obstacles: Tuple[Polygon, ...]
    footprint: Footprint
    _verts: np.ndarray = field(init=False, repr=False, compare=False)
    _starts: np.ndarray = field(init=False, repr=False, compare=False)
    _aabbs: np.ndarray = field(init=False, repr=False, compare=False)
    _bounds: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xmin, ymin, xmax, ymax = (float(b) for b in self.bounds)
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("degenerate bounds")
        object.__setattr__(self, "bounds", (xmin, ymin, xmax, ymax))
        obstacles = tuple(self.obstacles)
        object.__setattr__(self, "obstacles", obstacles)
        for poly in obstacles:
            for vx, vy in poly.vertices:
                if not (xmin <= vx <= xmax and ymin <= vy <= ymax):
                    raise ValueError(f"obstacle vertex ({vx}, {vy}) outside bounds")
        if obstacles:
            verts = np.concatenate([p.array for p in obstacles])
            sizes = [len(p.vertices) for p in obstacles]
            aabbs = np.array([p.bbox() for p in obstacles], dtype=np.float64)
        else:
            verts = np.zeros((0, 2))
            sizes = []
            aabbs = np.zeros((0, 4))
        starts = np.zeros(len(sizes) + 1, dtype=np.int64)
        starts[1:] = np.cumsum(sizes)
        for name, arr in (("_verts", verts), ("_starts", starts), ("_aabbs", aabbs)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        b = np.array(self.bounds, dtype=np.float64)
        b.setflags(write=False)
        object.__setattr__(self, "_bounds", b)

    @property
    def width(self) -> float:
        return self.bounds[2] - self.bounds[0]

    @property
    def height(self) -> float:
        return self.bounds[3] - self.bounds[1]

    def with_obstacles(self, obstacles: Iterable[Polygon]) -> "World":
        return World(self.bounds, tuple(obstacles), self.footprint)

    def collision_args(self) -> tuple:
        """Positional arguments shared by the compiled collision kernels."""
        fp = self.footprint
        return (fp.half_length, fp.half_width, self._bounds, self._verts, self._starts, self._aabbs)

    def config_collides(self, q) -> bool:
        fp = self.footprint
        return bool(_config_collides(float(q[0]), float(q[1]), float(q[2]), fp.half_length, fp.half_width,
                                     self._bounds, self._verts, self._starts, self._aabbs))

    def first_collision(self, states: np.ndarray) -> int:
        """Index of the first colliding state, or -1."""
        fp = self.footprint
        return int(_first_collision(np.ascontiguousarray(states, dtype=np.float64), fp.half_length,
                                    fp.half_width, self._bounds, self._verts, self._starts, self._aabbs))

    def segment_collides(self, states: np.ndarray) -> bool:
        return self.first_collision(states) >= 0

    def position_free(self, p: Point2, clearance: float | None = None) -> bool:
        """True if a disc around ``p`` (default: footprint circumradius) is obstacle-free."""
        r = self.footprint.radius if clearance is None else clearance
        # a square footprint of half-size r covers the disc
        return not _config_collides(float(p[0]), float(p[1]), 0.0, r, r, self._bounds, self._verts,
                                    self._starts, self._aabbs)


def config_collides(q, world: World) -> bool:
    return world.config_collides(q)


def segment_collides(states, world: World) -> bool:
    return world.segment_collides(np.asarray(states, dtype=np.float64))


# --------------------------------------------------------------------------
# map file format


class MapParseError(ValueError):
    pass


def parse_map(text: str, footprint: Footprint) -> World:
    bounds = None
    obstacles: List[Polygon] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            vals = [float(v) for v in rest]
        except ValueError as exc:
            raise MapParseError(f"line {lineno}: bad number ({exc})") from None
        if head == "bounds":
            if len(vals) != 4:
                raise MapParseError(f"line {lineno}: bounds needs 4 numbers")
            bounds = tuple(vals)
        elif head == "obstacle":
            if len(vals) < 6 or len(vals) % 2:
                raise MapParseError(f"line {lineno}: obstacle needs >=3 x y pairs")
            pts = tuple((vals[i], vals[i + 1]) for i in range(0, len(vals), 2))
            obstacles.append(Polygon(pts))
        else:
            raise MapParseError(f"line {lineno}: unknown directive {head!r}")
    if bounds is None:
        raise MapParseError("missing bounds")
    try:
        return World(bounds, tuple(obstacles), footprint)
    except ValueError as exc:
        raise MapParseError(str(exc)) from None


def format_map(world: World) -> str:
    lines = ["bounds " + " ".join(repr(b) for b in world.bounds)]
    for poly in world.obstacles:
        lines.append("obstacle " + " ".join(f"{x!r} {y!r}" for x, y in poly.vertices))
    return "\n".join(lines) + "\n"
