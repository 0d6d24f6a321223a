"""Incremental nearest-neighbour index over planar positions.

Points live in a static ``cKDTree`` plus a linearly scanned tail of recent
inserts; the tree is rebuilt when the tail outgrows a quarter of it. All
distances are recomputed with one formula so ties resolve identically
(lowest node id wins) whichever structure found the candidate.
"""
from __future__ import annotations

import math
from typing import List, Tuple

import numba
import numpy as np
from scipy.spatial import cKDTree


class DuplicateId(KeyError):
    pass


class EmptyIndex(LookupError):
    pass


_SLACK = 1e-9


@numba.njit(cache=True)
def _scan(xy, ids, rows, px, py, best_id, best_d):
    """Fold ``rows`` into the running best (lowest id among equal distances)."""
    for r in rows:
        dx = xy[r, 0] - px
        dy = xy[r, 1] - py
        d = math.sqrt(dx * dx + dy * dy)
        if d < best_d or (d == best_d and ids[r] < best_id):
            best_d = d
            best_id = ids[r]
    return best_id, best_d


@numba.njit(cache=True)
def _scan_range(xy, ids, lo, hi, px, py, best_id, best_d):
    for r in range(lo, hi):
        dx = xy[r, 0] - px
        dy = xy[r, 1] - py
        d = math.sqrt(dx * dx + dy * dy)
        if d < best_d or (d == best_d and ids[r] < best_id):
            best_d = d
            best_id = ids[r]
    return best_id, best_d


@numba.njit(cache=True)
def _within(xy, rows, px, py, h):
    keep = np.zeros(rows.shape[0], dtype=np.bool_)
    for k in range(rows.shape[0]):
        dx = xy[rows[k], 0] - px
        dy = xy[rows[k], 1] - py
        keep[k] = math.sqrt(dx * dx + dy * dy) <= h
    return rows[keep]


class SpatialIndex:
    def __init__(self, min_tail: int = 4096):
        self._xy = np.empty((64, 2))
        self._ids = np.empty(64, dtype=np.int64)
        self._n = 0
        self._known = set()
        self._kd = None
        self._kd_n = 0
        self._min_tail = min_tail

    def __len__(self) -> int:
        return self._n

    def insert(self, node_id: int, position) -> None:
        if node_id in self._known:
            raise DuplicateId(node_id)
        if self._n == self._xy.shape[0]:
            self._xy = np.concatenate([self._xy, np.empty_like(self._xy)])
            self._ids = np.concatenate([self._ids, np.empty_like(self._ids)])
        self._xy[self._n, 0] = position[0]
        self._xy[self._n, 1] = position[1]
        self._ids[self._n] = node_id
        self._n += 1
        self._known.add(node_id)
        if self._n - self._kd_n > max(self._min_tail, self._kd_n // 4):
            self._kd = cKDTree(self._xy[: self._n].copy())
            self._kd_n = self._n

    def positions(self) -> np.ndarray:
        return self._xy[: self._n]

    def ids(self) -> np.ndarray:
        return self._ids[: self._n]

    def nearest(self, p) -> Tuple[int, float]:
        """``(node_id, distance)`` of the closest key; ties go to the lowest id."""
        if self._n == 0:
            raise EmptyIndex("nearest on an empty index")
        px, py = float(p[0]), float(p[1])
        best_id, best_d = -1, np.inf
        if self._kd is not None:
            dk, rk = self._kd.query((px, py), k=2)
            reach = dk[0] * (1 + _SLACK) + _SLACK
            if dk[1] <= reach:
                # near-tie: collect every candidate the kd metric could have misordered
                rows = np.asarray(self._kd.query_ball_point((px, py), reach), dtype=np.int64)
            else:
                rows = np.asarray(rk[:1], dtype=np.int64)
            best_id, best_d = _scan(self._xy, self._ids, rows, px, py, best_id, best_d)
        if self._n > self._kd_n:
            best_id, best_d = _scan_range(self._xy, self._ids, self._kd_n, self._n, px, py, best_id, best_d)
        return int(best_id), float(best_d)

    def within_radius(self, p, h: float) -> List[int]:
        if not h > 0:
            raise ValueError("radius must be positive")
        px, py = float(p[0]), float(p[1])
        out = []
        if self._kd is not None:
            rows = np.asarray(self._kd.query_ball_point((px, py), h * (1 + _SLACK) + _SLACK), dtype=np.int64)
            if rows.size:
                out.extend(self._ids[_within(self._xy, rows, px, py, h)].tolist())
        if self._n > self._kd_n:
            rows = np.arange(self._kd_n, self._n)
            out.extend(self._ids[_within(self._xy, rows, px, py, h)].tolist())
        return out
