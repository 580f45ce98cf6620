"""Core value types for the repulsive energy field.

A field is a scalar function over the plane with values in [0, 1]: 1 means a
location is fully restricted, 0 means free flight. Complex fields are composed
from four fundamental repulsive units (point, line, rectangle, ellipse) by
taking the pointwise maximum of their energies.

Everything in this module is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Vec2",
    "Matrix2",
    "FieldUnit",
    "PointUnit",
    "LineUnit",
    "RectUnit",
    "EllipseUnit",
    "CompositeField",
    "SYMMETRY_RTOL",
    "KIND_POINT",
    "KIND_LINE",
    "KIND_RECT",
    "KIND_ELLIPSE",
    "PARAM_WIDTH",
]

# Relative tolerance for the off-diagonal symmetry check of 2x2 matrices.
SYMMETRY_RTOL = 1e-9

# Kind codes shared with the evaluation kernels.
KIND_POINT = 0
KIND_LINE = 1
KIND_RECT = 2
KIND_ELLIPSE = 3

# Packed parameter row width (see FieldUnit.pack_row for the layout).
PARAM_WIDTH = 8


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Vec2:
    """A planar point or displacement. Components must be finite."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        _require_finite("Vec2 component", self.x, self.y)

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class Matrix2:
    """A symmetric positive-definite 2x2 matrix.

    Used in two roles: as a repulsion matrix (controls how quickly unit energy
    decays with distance from the zero-repulsion set; entries are squared
    lengths) and as an ellipse shape matrix (maps the unit disk onto the
    ellipse interior; entries are lengths).

    The raw entries are stored exactly as given so serialization can reproduce
    them; computations use the symmetrized off-diagonal.
    """

    a11: float
    a12: float
    a21: float
    a22: float

    def __post_init__(self):
        object.__setattr__(self, "a11", float(self.a11))
        object.__setattr__(self, "a12", float(self.a12))
        object.__setattr__(self, "a21", float(self.a21))
        object.__setattr__(self, "a22", float(self.a22))
        _require_finite("matrix entry", self.a11, self.a12, self.a21, self.a22)
        tol = SYMMETRY_RTOL * max(abs(self.a12), abs(self.a21), 1.0)
        if abs(self.a12 - self.a21) > tol:
            raise ValueError(
                f"matrix is not symmetric: off-diagonals {self.a12} != {self.a21}"
            )
        if not (self.a11 > 0.0 and self.a11 * self.a22 - self.a12 * self.a21 > 0.0):
            raise ValueError(
                "matrix is not positive definite: "
                f"[[{self.a11}, {self.a12}], [{self.a21}, {self.a22}]]"
            )

    @classmethod
    def diagonal(cls, a: float, b: float) -> "Matrix2":
        return cls(a, 0.0, 0.0, b)

    @classmethod
    def from_rows(cls, rows) -> "Matrix2":
        (a11, a12), (a21, a22) = rows
        return cls(a11, a12, a21, a22)

    def rows(self) -> list:
        return [[self.a11, self.a12], [self.a21, self.a22]]

    @property
    def sym_offdiag(self) -> float:
        return 0.5 * (self.a12 + self.a21)

    def inverse_entries(self) -> tuple[float, float, float]:
        """Closed-form inverse (i11, i12, i22) of the symmetrized matrix."""
        m = self.sym_offdiag
        det = self.a11 * self.a22 - m * m
        return self.a22 / det, -m / det, self.a11 / det

    def eigen_max(self) -> float:
        """Largest eigenvalue of the symmetrized matrix."""
        m = self.sym_offdiag
        half_tr = 0.5 * (self.a11 + self.a22)
        disc = math.hypot(0.5 * (self.a11 - self.a22), m)
        return half_tr + disc

    def quad_form_inv(self, v: Vec2) -> float:
        """v' M^-1 v for this matrix M."""
        i11, i12, i22 = self.inverse_entries()
        return i11 * v.x * v.x + 2.0 * i12 * v.x * v.y + i22 * v.y * v.y

    def apply_inv(self, v: Vec2) -> Vec2:
        i11, i12, i22 = self.inverse_entries()
        return Vec2(i11 * v.x + i12 * v.y, i12 * v.x + i22 * v.y)


class FieldUnit:
    """Base class for the four fundamental repulsive units.

    Every unit carries a repulsion matrix and evaluates to an energy in (0, 1]
    at any finite point: exactly 1 on its zero-repulsion set, decaying as a
    Gaussian of the repulsion-weighted displacement away from it.
    """

    repulsion: Matrix2
    kind: int

    def pack_row(self, row: np.ndarray) -> None:
        """Fill one packed parameter row for the evaluation kernels.

        Layout (columns 0..7):
          point    cx, cy, -, -, -, iA11, iA12, iA22
          line     x1, y1, x2, y2, -, iA11, iA12, iA22
          rect     minx, miny, maxx, maxy, -, iA11, iA12, iA22
          ellipse  cx, cy, iB11, iB12, iB22, iA11, iA12, iA22
        where iA/iB are the inverse repulsion/shape matrix entries.
        """
        raise NotImplementedError

    def bounds(self) -> tuple[float, float, float, float]:
        """Axis-aligned bounds (minx, miny, maxx, maxy) of the zero-repulsion set."""
        raise NotImplementedError

    def reach(self, k: float) -> float:
        """Distance beyond bounds() past which energy is at most exp(-k^2)."""
        return k * math.sqrt(self.repulsion.eigen_max())

    def _pack_repulsion(self, row: np.ndarray) -> None:
        row[5], row[6], row[7] = self.repulsion.inverse_entries()


@dataclass(frozen=True)
class PointUnit(FieldUnit):
    """Repulsive bump around a single location."""

    center: Vec2
    repulsion: Matrix2
    kind: int = field(default=KIND_POINT, init=False)

    def pack_row(self, row: np.ndarray) -> None:
        row[0], row[1] = self.center.x, self.center.y
        self._pack_repulsion(row)

    def bounds(self):
        return self.center.x, self.center.y, self.center.x, self.center.y


@dataclass(frozen=True)
class LineUnit(FieldUnit):
    """Repulsion around a closed segment; energy 1 exactly on the segment.

    A zero-length segment degenerates to a point unit at p1.
    """

    p1: Vec2
    p2: Vec2
    repulsion: Matrix2
    kind: int = field(default=KIND_LINE, init=False)

    def pack_row(self, row: np.ndarray) -> None:
        row[0], row[1], row[2], row[3] = self.p1.x, self.p1.y, self.p2.x, self.p2.y
        self._pack_repulsion(row)

    def bounds(self):
        return (
            min(self.p1.x, self.p2.x),
            min(self.p1.y, self.p2.y),
            max(self.p1.x, self.p2.x),
            max(self.p1.y, self.p2.y),
        )


@dataclass(frozen=True)
class RectUnit(FieldUnit):
    """Repulsion around an axis-aligned rectangle; energy 1 on the closed rectangle.

    Corners are canonicalized on construction: c1 holds the element-wise
    minimum and c2 the maximum, so evaluation is independent of corner order.
    """

    c1: Vec2
    c2: Vec2
    repulsion: Matrix2
    kind: int = field(default=KIND_RECT, init=False)

    def __post_init__(self):
        lo = Vec2(min(self.c1.x, self.c2.x), min(self.c1.y, self.c2.y))
        hi = Vec2(max(self.c1.x, self.c2.x), max(self.c1.y, self.c2.y))
        object.__setattr__(self, "c1", lo)
        object.__setattr__(self, "c2", hi)

    def pack_row(self, row: np.ndarray) -> None:
        row[0], row[1], row[2], row[3] = self.c1.x, self.c1.y, self.c2.x, self.c2.y
        self._pack_repulsion(row)

    def bounds(self):
        return self.c1.x, self.c1.y, self.c2.x, self.c2.y


@dataclass(frozen=True)
class EllipseUnit(FieldUnit):
    """Repulsion around an elliptical region; energy 1 inside and on the ellipse.

    The shape matrix maps the unit disk onto the ellipse interior, so its
    largest eigenvalue is the major semi-axis length.
    """

    center: Vec2
    shape: Matrix2
    repulsion: Matrix2
    kind: int = field(default=KIND_ELLIPSE, init=False)

    def pack_row(self, row: np.ndarray) -> None:
        row[0], row[1] = self.center.x, self.center.y
        row[2], row[3], row[4] = self.shape.inverse_entries()
        self._pack_repulsion(row)

    def bounds(self):
        r = self.shape.eigen_max()
        return self.center.x - r, self.center.y - r, self.center.x + r, self.center.y + r


@dataclass(frozen=True)
class CompositeField:
    """An ordered collection of units evaluated by max-composition.

    The empty field evaluates to 0 everywhere. Unit order is significant only
    for tie-breaking (gradient attribution picks the lowest index among
    maximizing units).
    """

    units: tuple[FieldUnit, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))

    def __len__(self) -> int:
        return len(self.units)

    @cached_property
    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        """Kind-code and parameter arrays consumed by the evaluation kernels."""
        n = len(self.units)
        kinds = np.empty(n, dtype=np.int64)
        params = np.zeros((n, PARAM_WIDTH), dtype=np.float64)
        for i, u in enumerate(self.units):
            kinds[i] = u.kind
            u.pack_row(params[i])
        return kinds, params
