"""Head-to-head timing of the compiled kernels against the pure-NumPy fallback.

Runs the two hot paths on representative workloads:

  * eval_many  — max-composed field evaluation over a dense lattice
  * plan_grid  — A* over a weighted 8-connected grid

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import math
import time

import numpy as np

from fieldspace.kernels import pure
from fieldspace.units import (
    CompositeField,
    EllipseUnit,
    LineUnit,
    Matrix2,
    PointUnit,
    RectUnit,
    Vec2,
)

try:
    from fieldspace.kernels import jit
except ImportError:
    jit = None

SQRT2 = math.sqrt(2.0)


def spd(rng, lo, hi):
    l1, l2 = rng.uniform(lo, hi, 2)
    theta = rng.uniform(0, math.pi)
    c, s = math.cos(theta), math.sin(theta)
    return Matrix2(
        c * c * l1 + s * s * l2,
        c * s * (l1 - l2),
        c * s * (l1 - l2),
        s * s * l1 + c * c * l2,
    )


def random_field(rng, n_units):
    units = []
    for _ in range(n_units):
        a = spd(rng, 1e3, 1e5)
        kind = rng.integers(0, 4)
        p = Vec2(*rng.uniform(-4000, 4000, 2))
        q = Vec2(*rng.uniform(-4000, 4000, 2))
        if kind == 0:
            units.append(PointUnit(center=p, repulsion=a))
        elif kind == 1:
            units.append(LineUnit(p1=p, p2=q, repulsion=a))
        elif kind == 2:
            units.append(
                RectUnit(
                    c1=Vec2(min(p.x, q.x), min(p.y, q.y)),
                    c2=Vec2(max(p.x, q.x), max(p.y, q.y)),
                    repulsion=a,
                )
            )
        else:
            units.append(EllipseUnit(center=p, shape=spd(rng, 50, 400), repulsion=a))
    return CompositeField(units=tuple(units))


def eval_workload(rng, n_units=48, n=512):
    kinds, params = random_field(rng, n_units).packed
    gx = np.linspace(-5000, 5000, n)
    gy = np.linspace(-5000, 5000, n)
    xs, ys = (a.ravel() for a in np.meshgrid(gx, gy))
    return kinds, params, xs, ys


def plan_workload(rng, ny=300, nx=300, cell=25.0, p_block=0.15):
    blocked = rng.random((ny, nx)) < p_block
    blocked[0, 0] = blocked[ny - 1, nx - 1] = False

    def family(mult, pair_block):
        w = np.full((ny, nx), np.inf)
        core = mult * (1.0 + rng.exponential(1.0, pair_block.shape))
        core[pair_block] = np.inf
        return w, core

    w_e, core = family(cell, blocked[:, :-1] | blocked[:, 1:])
    w_e[:, :-1] = core
    w_n, core = family(cell, blocked[:-1, :] | blocked[1:, :])
    w_n[:-1, :] = core
    w_ne, core = family(cell * SQRT2, blocked[:-1, :-1] | blocked[1:, 1:])
    w_ne[:-1, :-1] = core
    w_nw, core = family(cell * SQRT2, blocked[:-1, 1:] | blocked[1:, :-1])
    w_nw[:-1, 1:] = core

    goal = ny * nx - 1
    gy, gx = divmod(goal, nx)
    X, Y = np.meshgrid(np.arange(nx) - gx, np.arange(ny) - gy)
    h = cell * np.hypot(X, Y) * (1.0 - 1e-9)
    return (w_e, w_n, w_ne, w_nw, h, 0, goal)


def best_of(fn, args, repeats):
    best = math.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    opts = ap.parse_args()

    rng = np.random.default_rng(17)
    ev = eval_workload(rng)
    pl = plan_workload(rng)

    if jit is not None:
        # compile outside the timed region
        jit.eval_many(ev[0][:2], ev[1][:2], ev[2][:64], ev[3][:64])
        jit.plan_grid(*plan_workload(np.random.default_rng(1), ny=24, nx=24))

    rows = []
    for name, args, call in [
        ("eval_many 512x512 lattice, 48 units", ev, "eval_many"),
        ("plan_grid 300x300, 15% blocked", pl, "plan_grid"),
    ]:
        t_pure, out_pure = best_of(getattr(pure, call), args, opts.repeats)
        if jit is None:
            rows.append((name, t_pure, None, None))
            continue
        t_jit, out_jit = best_of(getattr(jit, call), args, opts.repeats)
        if call == "eval_many":
            agree = float(np.max(np.abs(out_pure - out_jit)))
        else:
            agree = abs(out_pure[1] - out_jit[1])
        rows.append((name, t_pure, t_jit, agree))

    width = max(len(r[0]) for r in rows)
    print(f"{'workload':<{width}}  {'numpy':>9}  {'numba':>9}  {'speedup':>8}  max|diff|")
    for name, t_pure, t_jit, agree in rows:
        if t_jit is None:
            print(f"{name:<{width}}  {t_pure * 1e3:7.1f}ms  {'n/a':>9}  {'n/a':>8}  n/a")
        else:
            print(
                f"{name:<{width}}  {t_pure * 1e3:7.1f}ms  {t_jit * 1e3:7.1f}ms"
                f"  {t_pure / t_jit:7.1f}x  {agree:.3g}"
            )
    if jit is None:
        print("numba not importable; only the fallback was timed")


if __name__ == "__main__":
    main()
