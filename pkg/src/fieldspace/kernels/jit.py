"""Numba-compiled evaluation and planning kernels.

Hot paths of the package: max-composed field evaluation over many points and
A* grid planning. Compiled lazily on first call and cached on disk
(``cache=True``). Arithmetic and tie-breaking match ``pure.py``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from ..units import KIND_ELLIPSE, KIND_LINE, KIND_POINT, KIND_RECT

_POINT = KIND_POINT
_LINE = KIND_LINE
_RECT = KIND_RECT
_ELLIPSE = KIND_ELLIPSE


@njit(cache=True)
def _unit_energy(kind, p, x, y):
    if kind == _POINT:
        dx = x - p[0]
        dy = y - p[1]
    elif kind == _LINE:
        ux = p[2] - p[0]
        uy = p[3] - p[1]
        seg2 = ux * ux + uy * uy
        if seg2 == 0.0:
            dx = x - p[0]
            dy = y - p[1]
        else:
            t = ((x - p[0]) * ux + (y - p[1]) * uy) / seg2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            dx = x - (p[0] + t * ux)
            dy = y - (p[1] + t * uy)
    elif kind == _RECT:
        if x < p[0]:
            dx = x - p[0]
        elif x > p[2]:
            dx = x - p[2]
        else:
            dx = 0.0
        if y < p[1]:
            dy = y - p[1]
        elif y > p[3]:
            dy = y - p[3]
        else:
            dy = 0.0
    else:
        dx = x - p[0]
        dy = y - p[1]
        vx = p[2] * dx + p[3] * dy
        vy = p[3] * dx + p[4] * dy
        r = math.sqrt(vx * vx + vy * vy)
        if r <= 1.0:
            dx = 0.0
            dy = 0.0
        else:
            f = 1.0 - 1.0 / r
            dx = f * dx
            dy = f * dy
    q = p[5] * dx * dx + 2.0 * p[6] * dx * dy + p[7] * dy * dy
    return math.exp(-q)


@njit(cache=True)
def eval_many(kinds, params, xs, ys):
    """Max-composed energy of all units at each point. Empty field gives zeros."""
    out = np.zeros(xs.shape[0], dtype=np.float64)
    for i in range(xs.shape[0]):
        best = 0.0
        for u in range(kinds.shape[0]):
            e = _unit_energy(kinds[u], params[u], xs[i], ys[i])
            if e > best:
                best = e
        out[i] = best
    return out


@njit(cache=True)
def eval_units_at(kinds, params, x, y):
    """Per-unit energies at a single point, in unit order."""
    out = np.empty(kinds.shape[0], dtype=np.float64)
    for u in range(kinds.shape[0]):
        out[u] = _unit_energy(kinds[u], params[u], x, y)
    return out


@njit(cache=True)
def _heap_push(heap_f, heap_i, size, f, i):
    pos = size
    heap_f[pos] = f
    heap_i[pos] = i
    while pos > 0:
        up = (pos - 1) // 2
        fu = heap_f[up]
        iu = heap_i[up]
        if f < fu or (f == fu and i < iu):
            heap_f[pos] = fu
            heap_i[pos] = iu
            heap_f[up] = f
            heap_i[up] = i
            pos = up
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(heap_f, heap_i, size):
    f0 = heap_f[0]
    i0 = heap_i[0]
    size -= 1
    if size > 0:
        f = heap_f[size]
        i = heap_i[size]
        pos = 0
        while True:
            left = 2 * pos + 1
            if left >= size:
                break
            right = left + 1
            child = left
            if right < size and (
                heap_f[right] < heap_f[left]
                or (heap_f[right] == heap_f[left] and heap_i[right] < heap_i[left])
            ):
                child = right
            fc = heap_f[child]
            ic = heap_i[child]
            if fc < f or (fc == f and ic < i):
                heap_f[pos] = fc
                heap_i[pos] = ic
                pos = child
            else:
                break
        heap_f[pos] = f
        heap_i[pos] = i
    return f0, i0, size


@njit(cache=True)
def plan_grid(w_e, w_n, w_ne, w_nw, h, start, goal):
    """A* over an 8-connected grid with precomputed edge weights.

    Same contract as the pure backend: symmetric direction weight arrays with
    +inf for missing edges, admissible per-cell heuristic, ties on f broken
    toward the lower cell index. Returns (path, cost) or (empty, +inf).
    """
    ny, nx = w_e.shape
    n = nx * ny
    dist = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    hf = h.ravel()
    # Each strict g-improvement pushes once; in-degree 8 bounds the heap.
    heap_f = np.empty(8 * n + 16, dtype=np.float64)
    heap_i = np.empty(8 * n + 16, dtype=np.int64)
    size = 0
    dist[start] = 0.0
    size = _heap_push(heap_f, heap_i, size, hf[start], start)
    while size > 0:
        f, u, size = _heap_pop(heap_f, heap_i, size)
        if f > dist[u] + hf[u]:
            continue  # stale entry
        if u == goal:
            break
        ux = u % nx
        uy = u // nx
        du = dist[u]
        for d in range(8):
            if d == 0:  # east
                if ux + 1 >= nx:
                    continue
                w = w_e[uy, ux]
                v = u + 1
            elif d == 1:  # west
                if ux <= 0:
                    continue
                w = w_e[uy, ux - 1]
                v = u - 1
            elif d == 2:  # north
                if uy + 1 >= ny:
                    continue
                w = w_n[uy, ux]
                v = u + nx
            elif d == 3:  # south
                if uy <= 0:
                    continue
                w = w_n[uy - 1, ux]
                v = u - nx
            elif d == 4:  # northeast
                if ux + 1 >= nx or uy + 1 >= ny:
                    continue
                w = w_ne[uy, ux]
                v = u + nx + 1
            elif d == 5:  # southwest
                if ux <= 0 or uy <= 0:
                    continue
                w = w_ne[uy - 1, ux - 1]
                v = u - nx - 1
            elif d == 6:  # northwest
                if ux <= 0 or uy + 1 >= ny:
                    continue
                w = w_nw[uy, ux]
                v = u + nx - 1
            else:  # southeast
                if ux + 1 >= nx or uy <= 0:
                    continue
                w = w_nw[uy - 1, ux + 1]
                v = u - nx + 1
            if not np.isfinite(w):
                continue
            nd = du + w
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                size = _heap_push(heap_f, heap_i, size, nd + hf[v], v)

    if not np.isfinite(dist[goal]):
        return np.empty(0, dtype=np.int64), np.inf
    count = 1
    node = goal
    while node != start:
        node = parent[node]
        count += 1
    path = np.empty(count, dtype=np.int64)
    node = goal
    for k in range(count - 1, -1, -1):
        path[k] = node
        node = parent[node]
    return path, dist[goal]
