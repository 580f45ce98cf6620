"""Evaluation of repulsive energy fields.

Two routes exist for unit evaluation: the scalar reference functions here
(``eval_point_unit`` and friends, written in plain closed form) and the array
kernels in ``fieldspace.kernels`` used by the bulk entry points. The test
suite holds the two routes to each other.

Energy-to-cost transformation: a route integrand must diverge as energy
approaches full restriction, so cost uses -ln(1 - e) with a configurable
cutoff above which the result is +inf.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels
from .units import CompositeField, Matrix2, Vec2

__all__ = [
    "eval_point_unit",
    "eval_line_unit",
    "eval_rect_unit",
    "eval_ellipse_unit",
    "eval_unit",
    "eval_composite",
    "eval_composite_many",
    "grad_composite",
    "sample_grid",
    "transform_energy",
    "DEFAULT_SAMPLE_CAP",
    "GRAD_STEP_REL",
]

# Guard against accidentally huge raster requests.
DEFAULT_SAMPLE_CAP = 4_000_000

# Finite-difference step, relative to the local coordinate magnitude.
GRAD_STEP_REL = 1e-6


def eval_point_unit(x: Vec2, center: Vec2, repulsion: Matrix2) -> float:
    """Gaussian bump of the repulsion-weighted displacement from the center."""
    return math.exp(-repulsion.quad_form_inv(x - center))


def eval_line_unit(x: Vec2, p1: Vec2, p2: Vec2, repulsion: Matrix2) -> float:
    """Gaussian of the displacement from the closest point of the segment.

    The projection parameter is clamped to [0, 1]; a zero-length segment
    degenerates to a point unit at p1.
    """
    u = p2 - p1
    seg2 = u.dot(u)
    if seg2 == 0.0:
        closest = p1
    else:
        t = min(max(u.dot(x - p1) / seg2, 0.0), 1.0)
        closest = p1 + u.scaled(t)
    return math.exp(-repulsion.quad_form_inv(x - closest))


def eval_rect_unit(x: Vec2, c1: Vec2, c2: Vec2, repulsion: Matrix2) -> float:
    """Gaussian of the signed per-axis distance from the closed rectangle.

    Per axis the distance to the interval is half of |x-c1| + |x-c2| minus the
    interval width, reoriented by the sign of x-c1; zero inside. Corners must
    be canonicalized (c1 element-wise minimum).
    """
    gx = math.copysign(0.5 * (abs(x.x - c1.x) + abs(x.x - c2.x) - abs(c1.x - c2.x)), x.x - c1.x)
    gy = math.copysign(0.5 * (abs(x.y - c1.y) + abs(x.y - c2.y) - abs(c1.y - c2.y)), x.y - c1.y)
    return math.exp(-repulsion.quad_form_inv(Vec2(gx, gy)))


def eval_ellipse_unit(x: Vec2, center: Vec2, shape: Matrix2, repulsion: Matrix2) -> float:
    """Gaussian of the displacement shrunk toward zero inside the ellipse.

    The displacement is scaled by max(1 - 1/||shape^-1 (x-center)||, 0), which
    vanishes on and inside the ellipse; the center itself (where the norm is
    zero) is defined to have zero repulsion displacement.
    """
    d = x - center
    r = shape.apply_inv(d).norm()
    if r <= 1.0:
        return 1.0
    g = d.scaled(1.0 - 1.0 / r)
    return math.exp(-repulsion.quad_form_inv(g))


def eval_unit(unit, x: Vec2) -> float:
    """Scalar-reference evaluation of any unit."""
    from .units import EllipseUnit, LineUnit, PointUnit, RectUnit

    if isinstance(unit, PointUnit):
        return eval_point_unit(x, unit.center, unit.repulsion)
    if isinstance(unit, LineUnit):
        return eval_line_unit(x, unit.p1, unit.p2, unit.repulsion)
    if isinstance(unit, RectUnit):
        return eval_rect_unit(x, unit.c1, unit.c2, unit.repulsion)
    if isinstance(unit, EllipseUnit):
        return eval_ellipse_unit(x, unit.center, unit.shape, unit.repulsion)
    raise TypeError(f"not a field unit: {unit!r}")


def eval_composite(field: CompositeField, x: Vec2) -> float:
    """Max over unit energies at x; 0 for the empty field."""
    kinds, params = field.packed
    xs = np.array([x.x], dtype=np.float64)
    ys = np.array([x.y], dtype=np.float64)
    return float(kernels.eval_many(kinds, params, xs, ys)[0])


def eval_composite_many(field: CompositeField, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized max-composed evaluation at many points."""
    kinds, params = field.packed
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    return kernels.eval_many(kinds, params, xs, ys)


def grad_composite(field: CompositeField, x: Vec2, step: float | None = None) -> Vec2:
    """Central finite-difference gradient of the composed field at x.

    The differenced function is the unit that attains the maximum at x; ties
    go to the lowest unit index, which makes the result a deterministic
    subgradient at tie points. The step defaults to GRAD_STEP_REL times the
    local coordinate magnitude (at least 1).
    """
    kinds, params = field.packed
    if kinds.shape[0] == 0:
        return Vec2(0.0, 0.0)
    energies = kernels.eval_units_at(kinds, params, x.x, x.y)
    best = int(np.argmax(energies))  # argmax returns the first (lowest) index
    h = step if step is not None else GRAD_STEP_REL * max(1.0, abs(x.x), abs(x.y))
    k1 = kinds[best : best + 1]
    p1 = params[best : best + 1]
    xs = np.array([x.x + h, x.x - h, x.x, x.x], dtype=np.float64)
    ys = np.array([x.y, x.y, x.y + h, x.y - h], dtype=np.float64)
    e = kernels.eval_many(k1, p1, xs, ys)
    return Vec2((e[0] - e[1]) / (2.0 * h), (e[2] - e[3]) / (2.0 * h))


def sample_grid(
    field: CompositeField,
    bbox: tuple[Vec2, Vec2],
    nx: int,
    ny: int,
    cap: int = DEFAULT_SAMPLE_CAP,
) -> np.ndarray:
    """Energies on an evenly spaced lattice over bbox, as an (ny, nx) matrix.

    Row 0 holds the minimum-y edge of the box; lattice points include the box
    corners exactly. Requests above ``cap`` samples are rejected to guard
    memory.
    """
    lo, hi = bbox
    if nx < 2 or ny < 2:
        raise ValueError(f"grid must be at least 2x2, got {nx}x{ny}")
    if not (hi.x > lo.x and hi.y > lo.y):
        raise ValueError("bbox is degenerate")
    if nx * ny > cap:
        raise ValueError(f"{nx}x{ny} exceeds the sample cap of {cap}")
    gx = np.linspace(lo.x, hi.x, nx)
    gy = np.linspace(lo.y, hi.y, ny)
    xs, ys = np.meshgrid(gx, gy)
    values = eval_composite_many(field, xs.ravel(), ys.ravel())
    return values.reshape(ny, nx)


def transform_energy(e: float, eps: float = 1e-9) -> float:
    """Map energy in [0, 1] to a nonnegative cost that diverges near 1.

    Returns -ln(1 - e) below the cutoff 1 - eps and +inf at or above it, so a
    full restriction always contributes an infinite cost. Monotone, and 0 at
    e = 0. Raises on inputs outside [0, 1].
    """
    if not (0.0 <= e <= 1.0):
        raise ValueError(f"energy must lie in [0, 1], got {e!r}")
    if e >= 1.0 - eps:
        return math.inf
    return -math.log1p(-e)
