"""Closed-tour TSP over the target-to-target cost matrix.

``solve_exact`` is Held-Karp (n <= 15). ``solve_heuristic`` builds
nearest-neighbour tours and improves them with 2-opt and Or-opt moves plus
double-bridge restarts. Tours are returned in canonical form: node 0 first,
and the second node smaller than the last.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

EXACT_LIMIT = 15


class TooLarge(ValueError):
    pass


class MissingPair(KeyError):
    pass


@dataclass(frozen=True)
class Tour:
    order: Tuple[int, ...]
    cost: float

    def edges(self) -> List[Tuple[int, int]]:
        n = len(self.order)
        return [(self.order[k], self.order[(k + 1) % n]) for k in range(n)]


def tour_cost(d, order: Sequence[int]) -> float:
    n = len(order)
    if n < 2:
        return 0.0
    return math.fsum(d[order[k]][order[(k + 1) % n]] for k in range(n))


def canonical(order: Sequence[int]) -> Tuple[int, ...]:
    order = list(order)
    k = order.index(min(order))
    order = order[k:] + order[:k]
    if len(order) > 2 and order[1] > order[-1]:
        order = [order[0]] + order[:0:-1]
    return tuple(order)


def _check_square(d) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    return d


def _trivial(d: np.ndarray):
    n = d.shape[0]
    if n == 0:
        raise ValueError("empty distance matrix")
    if n == 1:
        return Tour((0,), 0.0)
    if n == 2:
        return Tour((0, 1), tour_cost(d, (0, 1)))
    return None


def solve_exact(d) -> Tour:
    d = _check_square(d)
    n = d.shape[0]
    if n > EXACT_LIMIT:
        raise TooLarge(f"Held-Karp limited to {EXACT_LIMIT} nodes, got {n}")
    small = _trivial(d)
    if small is not None:
        return small
    m = n - 1
    sub = d[1:, 1:]
    full = (1 << m) - 1
    dp = np.full((1 << m, m), np.inf)
    parent = np.full((1 << m, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = d[0, j + 1]
    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        js = [j for j in range(m) if mask >> j & 1]
        prev = [mask ^ (1 << j) for j in js]
        cand = dp[prev, :] + sub[:, js].T
        k = np.argmin(cand, axis=1)
        dp[mask, js] = cand[np.arange(len(js)), k]
        parent[mask, js] = k
    closing = dp[full, :] + d[1:, 0]
    j = int(np.argmin(closing))
    if not np.isfinite(closing[j]):
        order = tuple(range(n))
        return Tour(order, math.inf)
    path = []
    mask = full
    while j >= 0:
        path.append(j + 1)
        pj = int(parent[mask, j])
        mask ^= 1 << j
        j = pj
    order = canonical([0] + path[::-1])
    return Tour(order, tour_cost(d, order))


def _finite(d: np.ndarray) -> np.ndarray:
    if np.all(np.isfinite(d)):
        return d
    fin = d[np.isfinite(d)]
    big = (float(fin.max()) + 1.0) * d.shape[0] * 1e3 if fin.size else 1.0
    return np.where(np.isfinite(d), d, big)


def _nearest_neighbour(d: np.ndarray, start: int) -> List[int]:
    n = d.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    order = [start]
    cur = start
    for _ in range(n - 1):
        row = np.where(seen, np.inf, d[cur])
        cur = int(np.argmin(row))
        seen[cur] = True
        order.append(cur)
    return order


def _len(d, order):
    n = len(order)
    return sum(d[order[k], order[(k + 1) % n]] for k in range(n))


def improve_tour(d, order: Sequence[int]) -> List[int]:
    """2-opt and Or-opt (segments of 1-3 nodes, both orientations) to a local optimum."""
    d = np.asarray(d, dtype=np.float64)
    t = list(order)
    n = len(t)
    if n < 4:
        return t
    eps = 1e-12 * max(1.0, float(np.max(d)))
    improved = True
    while improved:
        improved = False
        # 2-opt: reverse t[i+1..j]
        for i in range(n - 1):
            a, b = t[i], t[i + 1]
            for j in range(i + 2, n if i > 0 else n - 1):
                c, e = t[j], t[(j + 1) % n]
                delta = d[a, c] + d[b, e] - d[a, b] - d[c, e]
                if delta < -eps:
                    t[i + 1:j + 1] = t[i + 1:j + 1][::-1]
                    improved = True
                    a, b = t[i], t[i + 1]
        # Or-opt: move segment t[i..i+L-1] between two other neighbours
        for seg_len in (1, 2, 3):
            if seg_len > n - 3:
                break
            i = 0
            while i < n:
                seg = [t[(i + k) % n] for k in range(seg_len)]
                prev = t[(i - 1) % n]
                nxt = t[(i + seg_len) % n]
                removed = d[prev, seg[0]] + d[seg[-1], nxt] - d[prev, nxt]
                rest = [x for x in t if x not in seg]
                best = None
                best_delta = -eps
                for p in range(len(rest)):
                    u, v = rest[p], rest[(p + 1) % len(rest)]
                    if u == prev and v == nxt:
                        continue
                    for rev in (False, True):
                        s0, s1 = (seg[-1], seg[0]) if rev else (seg[0], seg[-1])
                        delta = d[u, s0] + d[s1, v] - d[u, v] - removed
                        if delta < best_delta:
                            best_delta = delta
                            best = (p, rev)
                if best is not None:
                    p, rev = best
                    ins = seg[::-1] if rev else seg
                    t = rest[:p + 1] + ins + rest[p + 1:]
                    improved = True
                i += 1
    return t


def _double_bridge(order: List[int], rng: np.random.Generator) -> List[int]:
    n = len(order)
    a, b, c = sorted(rng.choice(np.arange(1, n), size=3, replace=False).tolist())
    return order[:a] + order[b:c] + order[a:b] + order[c:]


def solve_heuristic(d, rng: np.random.Generator, restarts: int = 30) -> Tour:
    d = _check_square(d)
    small = _trivial(d)
    if small is not None:
        return small
    n = d.shape[0]
    work = _finite(d)
    best, best_len = None, math.inf
    for s in range(n):
        t = improve_tour(work, _nearest_neighbour(work, s))
        length = _len(work, t)
        if length < best_len - 1e-12 * max(1.0, length):
            best, best_len = t, length
    if n >= 8:
        for _ in range(restarts):
            t = improve_tour(work, _double_bridge(best, rng))
            length = _len(work, t)
            if length < best_len - 1e-12 * max(1.0, length):
                best, best_len = t, length
    order = canonical(best)
    return Tour(order, tour_cost(d, order))


def solve(d, rng: np.random.Generator) -> Tour:
    """Exact when small enough, heuristic otherwise."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape[0] <= EXACT_LIMIT:
        return solve_exact(d)
    return solve_heuristic(d, rng)


def matrix_from_forest(trajectories: Dict[Tuple[int, int], object], n: int) -> np.ndarray:
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            tau = trajectories.get((i, j))
            if tau is None:
                raise MissingPair((i, j))
            d[i, j] = tau.total_length
    if not np.array_equal(d, d.T):
        raise AssertionError("target-to-target cost matrix is not symmetric")
    return d
