"""Pure-NumPy evaluation and planning kernels.

Fallback backend with the same call surface as the numba-compiled kernels in
``jit.py``. Vectorized over points per unit; the grid planner uses ``heapq``.
Tie-breaking and arithmetic mirror the compiled backend so both produce the
same paths on the same inputs.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..units import KIND_ELLIPSE, KIND_LINE, KIND_POINT, KIND_RECT


def _unit_energies(kind: int, p: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    ia, ib, ic = p[5], p[6], p[7]
    if kind == KIND_POINT:
        dx = xs - p[0]
        dy = ys - p[1]
    elif kind == KIND_LINE:
        ux = p[2] - p[0]
        uy = p[3] - p[1]
        seg2 = ux * ux + uy * uy
        if seg2 == 0.0:
            dx = xs - p[0]
            dy = ys - p[1]
        else:
            t = ((xs - p[0]) * ux + (ys - p[1]) * uy) / seg2
            np.clip(t, 0.0, 1.0, out=t)
            dx = xs - (p[0] + t * ux)
            dy = ys - (p[1] + t * uy)
    elif kind == KIND_RECT:
        dx = np.where(xs < p[0], xs - p[0], np.where(xs > p[2], xs - p[2], 0.0))
        dy = np.where(ys < p[1], ys - p[1], np.where(ys > p[3], ys - p[3], 0.0))
    elif kind == KIND_ELLIPSE:
        dx = xs - p[0]
        dy = ys - p[1]
        vx = p[2] * dx + p[3] * dy
        vy = p[3] * dx + p[4] * dy
        r = np.sqrt(vx * vx + vy * vy)
        f = np.where(r <= 1.0, 0.0, 1.0 - 1.0 / np.where(r > 0.0, r, 1.0))
        dx = f * dx
        dy = f * dy
    else:
        raise ValueError(f"unknown unit kind {kind}")
    q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
    return np.exp(-q)


def eval_many(kinds: np.ndarray, params: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Max-composed energy of all units at each point. Empty field gives zeros."""
    out = np.zeros(xs.shape, dtype=np.float64)
    for u in range(kinds.shape[0]):
        np.maximum(out, _unit_energies(int(kinds[u]), params[u], xs, ys), out=out)
    return out


def eval_units_at(kinds: np.ndarray, params: np.ndarray, x: float, y: float) -> np.ndarray:
    """Per-unit energies at a single point, in unit order."""
    xs = np.array([x], dtype=np.float64)
    ys = np.array([y], dtype=np.float64)
    out = np.empty(kinds.shape[0], dtype=np.float64)
    for u in range(kinds.shape[0]):
        out[u] = _unit_energies(int(kinds[u]), params[u], xs, ys)[0]
    return out


def plan_grid(
    w_e: np.ndarray,
    w_n: np.ndarray,
    w_ne: np.ndarray,
    w_nw: np.ndarray,
    h: np.ndarray,
    start: int,
    goal: int,
) -> tuple[np.ndarray, float]:
    """A* over an 8-connected grid with precomputed edge weights.

    Weight arrays are (ny, nx); w_e[iy, ix] is the cost of the symmetric edge
    from cell (ix, iy) to its east neighbor, and similarly north / northeast /
    northwest. Infinite weight means no edge. ``h`` is the per-cell heuristic,
    admissible by construction. Ties on f are broken toward the lower cell
    index. Returns (path cell indices from start to goal, total cost); an
    empty path and +inf when the goal is unreachable.
    """
    ny, nx = w_e.shape
    n = nx * ny
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    dist[start] = 0.0
    open_heap: list[tuple[float, int]] = [(h.flat[start], start)]
    while open_heap:
        f, u = heapq.heappop(open_heap)
        if f > dist[u] + h.flat[u]:
            continue  # stale entry
        if u == goal:
            break
        ux = u % nx
        uy = u // nx
        du = dist[u]
        # east, west, north, south, NE, SW, NW, SE
        if ux + 1 < nx:
            _relax(dist, parent, open_heap, h, du, w_e[uy, ux], u, u + 1)
        if ux > 0:
            _relax(dist, parent, open_heap, h, du, w_e[uy, ux - 1], u, u - 1)
        if uy + 1 < ny:
            _relax(dist, parent, open_heap, h, du, w_n[uy, ux], u, u + nx)
        if uy > 0:
            _relax(dist, parent, open_heap, h, du, w_n[uy - 1, ux], u, u - nx)
        if ux + 1 < nx and uy + 1 < ny:
            _relax(dist, parent, open_heap, h, du, w_ne[uy, ux], u, u + nx + 1)
        if ux > 0 and uy > 0:
            _relax(dist, parent, open_heap, h, du, w_ne[uy - 1, ux - 1], u, u - nx - 1)
        if ux > 0 and uy + 1 < ny:
            _relax(dist, parent, open_heap, h, du, w_nw[uy, ux], u, u + nx - 1)
        if ux + 1 < nx and uy > 0:
            _relax(dist, parent, open_heap, h, du, w_nw[uy - 1, ux + 1], u, u - nx + 1)

    if not np.isfinite(dist[goal]):
        return np.empty(0, dtype=np.int64), float("inf")
    path = [goal]
    node = goal
    while node != start:
        node = int(parent[node])
        path.append(node)
    path.reverse()
    return np.asarray(path, dtype=np.int64), float(dist[goal])


def _relax(dist, parent, open_heap, h, du, w, u, v):
    if not np.isfinite(w):
        return
    nd = du + w
    if nd < dist[v]:
        dist[v] = nd
        parent[v] = u
        heapq.heappush(open_heap, (nd + h.flat[v], v))
