"""RGeoJSON: the restriction interchange format.

Documents are JSON-syntax geometry objects (keys ``type``, ``coordinates``,
``repulsion``, ``shape``, ``geometries``) with optional store-level siblings
(``id``, ``collection``, ``properties``, ``active_windows``). Nine geometry
kinds are supported; Polygon and MultiPolygon are deliberately rejected —
polygon data must be approximated with rectangles first (see
``approximate_polygon``).

Positions are ``[longitude, latitude]`` pairs. Repulsion and shape matrices
are 2x2 symmetric positive-definite; the parser is the single validation
gate, so every compiled unit is known-good. All parsed objects are immutable
and safe to share across threads.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from .geo import parse_timestamp
from .units import (
    EllipseUnit,
    FieldUnit,
    LineUnit,
    Matrix2,
    PointUnit,
    RectUnit,
    Vec2,
)

__all__ = [
    "RGeoJSONError",
    "ParseError",
    "SchemaError",
    "MatrixError",
    "GeometryError",
    "RangeError",
    "ActivationWindow",
    "RestrictionGeometry",
    "RestrictionDocument",
    "parse_document",
    "document_from_obj",
    "document_to_obj",
    "serialize_document",
    "compile_units",
    "iter_positions",
    "reach_margin",
    "approximate_polygon",
    "ingest_point_dataset",
    "read_point_records",
    "GEOMETRY_KINDS",
    "DEFAULT_COLLECTION",
    "POLYGON_RESOLUTION",
]

GEOMETRY_KINDS = frozenset(
    {
        "Point",
        "LineString",
        "Rectangle",
        "Ellipse",
        "MultiPoint",
        "MultiLineString",
        "MultiRectangle",
        "MultiEllipse",
        "GeometryCollection",
    }
)

# Geometry kinds from plain GeoJSON that this format removes.
_REJECTED_KINDS = frozenset({"Polygon", "MultiPolygon"})

_GEOM_KEYS = frozenset({"type", "coordinates", "repulsion", "shape", "geometries"})
_DOC_KEYS = frozenset({"id", "collection", "properties", "active_windows"})

DEFAULT_COLLECTION = "default"

# Raster resolution for polygon approximation (cells per axis).
POLYGON_RESOLUTION = 256

SECONDS_PER_DAY = 86_400


class RGeoJSONError(ValueError):
    """Base class for all restriction-format errors."""


class ParseError(RGeoJSONError):
    """The byte sequence is not well-formed UTF-8 JSON text."""


class SchemaError(RGeoJSONError):
    """Well-formed text that violates the document schema."""


class MatrixError(RGeoJSONError):
    """A repulsion or shape matrix is not symmetric positive-definite."""


class GeometryError(RGeoJSONError):
    """A polygon ring is open, self-intersecting, or degenerate."""


class RangeError(RGeoJSONError):
    """A coordinate lies outside the valid longitude/latitude range."""


# ---------------------------------------------------------------------------
# Activation windows


@dataclass(frozen=True)
class ActivationWindow:
    """A time interval during which a restriction is in force.

    ``start``/``end`` are inclusive UTC bounds; ``daily_from``/``daily_to``
    restrict to a half-open [from, to) seconds-of-day range evaluated in local
    time (UTC plus a configured offset), wrapping past midnight when
    from > to. At least one bound must be present; the daily pair is
    all-or-nothing.
    """

    start: Optional[datetime] = None
    end: Optional[datetime] = None
    daily_from: Optional[float] = None
    daily_to: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.daily_from is None) != (self.daily_to is None):
            raise SchemaError("daily_from and daily_to must be given together")
        if self.start is None and self.end is None and self.daily_from is None:
            raise SchemaError("activation window has no bounds")
        for name in ("start", "end"):
            v = getattr(self, name)
            if v is not None and v.tzinfo is None:
                raise SchemaError(f"window {name} must be timezone-aware")
        if self.daily_from is not None:
            if not (0.0 <= self.daily_from < SECONDS_PER_DAY):
                raise SchemaError(f"daily_from out of range: {self.daily_from!r}")
            if not (0.0 < self.daily_to <= SECONDS_PER_DAY):
                raise SchemaError(f"daily_to out of range: {self.daily_to!r}")
            if self.daily_from == self.daily_to:
                raise SchemaError("daily window is empty")

    def contains(self, t: datetime, utc_offset: float = 0.0) -> bool:
        if t.tzinfo is None:
            raise ValueError("activation checks need an aware timestamp")
        if self.start is not None and t < self.start:
            return False
        if self.end is not None and t > self.end:
            return False
        if self.daily_from is None:
            return True
        local = t + timedelta(seconds=utc_offset)
        sod = local.hour * 3600 + local.minute * 60 + local.second + local.microsecond / 1e6
        lo, hi = self.daily_from, self.daily_to
        if lo < hi:
            return lo <= sod < hi
        return sod >= lo or sod < hi  # wraps past midnight


def windows_active(
    windows: Sequence[ActivationWindow], t: datetime, utc_offset: float = 0.0
) -> bool:
    """No windows means always active; otherwise any window must contain t."""
    if not windows:
        return True
    return any(w.contains(t, utc_offset) for w in windows)


# ---------------------------------------------------------------------------
# Geometry and document model


@dataclass(frozen=True)
class RestrictionGeometry:
    """One validated geometry object (possibly a collection of geometries).

    ``coordinates`` is kind-normalized: a Vec2 for Point/Ellipse, a tuple of
    Vec2 for LineString/MultiPoint/MultiEllipse, a (lo, hi)-unordered corner
    pair for Rectangle, and nested tuples for the remaining Multi kinds.
    """

    kind: str
    coordinates: object = None
    repulsion: Optional[Matrix2] = None
    shape: Union[Matrix2, tuple, None] = None
    geometries: Optional[tuple] = None


@dataclass(frozen=True)
class RestrictionDocument:
    """A geometry plus the store-level metadata it travels with."""

    geometry: RestrictionGeometry
    id: str
    collection: str = DEFAULT_COLLECTION
    properties: dict = field(default_factory=dict)
    active_windows: tuple = ()


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _parse_position(v, where: str) -> Vec2:
    if not (isinstance(v, list) and len(v) == 2 and all(_is_number(c) for c in v)):
        raise SchemaError(f"{where}: position must be a [longitude, latitude] number pair")
    try:
        return Vec2(float(v[0]), float(v[1]))
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def _parse_position_list(v, where: str, minimum: int) -> tuple:
    if not isinstance(v, list):
        raise SchemaError(f"{where}: expected a list of positions")
    if len(v) < minimum:
        raise SchemaError(f"{where}: needs at least {minimum} positions, got {len(v)}")
    return tuple(_parse_position(p, where) for p in v)


def _parse_matrix(v, where: str) -> Matrix2:
    ok = (
        isinstance(v, list)
        and len(v) == 2
        and all(isinstance(r, list) and len(r) == 2 and all(_is_number(c) for c in r) for r in v)
    )
    if not ok:
        raise SchemaError(f"{where}: expected a 2x2 matrix as [[a,b],[c,d]]")
    try:
        return Matrix2.from_rows(v)
    except ValueError as exc:
        raise MatrixError(f"{where}: {exc}") from None


def _parse_geometry(obj: dict, where: str = "geometry") -> RestrictionGeometry:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    extra = set(obj) - _GEOM_KEYS
    if extra:
        raise SchemaError(f"{where}: unexpected keys {sorted(extra)}")
    kind = obj.get("type")
    if kind in _REJECTED_KINDS:
        raise SchemaError(f"{where}: {kind} geometry is not supported; approximate it first")
    if kind not in GEOMETRY_KINDS:
        raise SchemaError(f"{where}: unknown geometry type {kind!r}")

    if kind == "GeometryCollection":
        for key in ("coordinates", "repulsion", "shape"):
            if key in obj:
                raise SchemaError(f"{where}: GeometryCollection does not take {key!r}")
        members = obj.get("geometries")
        if not (isinstance(members, list) and members):
            raise SchemaError(f"{where}: GeometryCollection needs a non-empty geometries list")
        parsed = tuple(
            _parse_geometry(m, f"{where}.geometries[{i}]") for i, m in enumerate(members)
        )
        return RestrictionGeometry(kind=kind, geometries=parsed)

    if "geometries" in obj:
        raise SchemaError(f"{where}: only GeometryCollection takes 'geometries'")
    if "coordinates" not in obj:
        raise SchemaError(f"{where}: missing coordinates")
    if "repulsion" not in obj:
        raise SchemaError(f"{where}: missing repulsion matrix")
    repulsion = _parse_matrix(obj["repulsion"], f"{where}.repulsion")
    coords = obj["coordinates"]

    wants_shape = kind in ("Ellipse", "MultiEllipse")
    if not wants_shape and "shape" in obj:
        raise SchemaError(f"{where}: {kind} does not take a shape matrix")
    if wants_shape and "shape" not in obj:
        raise SchemaError(f"{where}: {kind} needs a shape matrix")

    if kind == "Point":
        return RestrictionGeometry(
            kind, _parse_position(coords, f"{where}.coordinates"), repulsion
        )
    if kind == "LineString":
        return RestrictionGeometry(
            kind, _parse_position_list(coords, f"{where}.coordinates", 2), repulsion
        )
    if kind == "Rectangle":
        pair = _parse_position_list(coords, f"{where}.coordinates", 2)
        if len(pair) != 2:
            raise SchemaError(f"{where}: Rectangle takes exactly 2 corner positions")
        return RestrictionGeometry(kind, pair, repulsion)
    if kind == "Ellipse":
        return RestrictionGeometry(
            kind,
            _parse_position(coords, f"{where}.coordinates"),
            repulsion,
            shape=_parse_matrix(obj["shape"], f"{where}.shape"),
        )
    if kind == "MultiPoint":
        return RestrictionGeometry(
            kind, _parse_position_list(coords, f"{where}.coordinates", 1), repulsion
        )
    if kind == "MultiLineString":
        if not (isinstance(coords, list) and coords):
            raise SchemaError(f"{where}: MultiLineString needs a non-empty list of linestrings")
        lines = tuple(
            _parse_position_list(line, f"{where}.coordinates[{i}]", 2)
            for i, line in enumerate(coords)
        )
        return RestrictionGeometry(kind, lines, repulsion)
    if kind == "MultiRectangle":
        if not (isinstance(coords, list) and coords):
            raise SchemaError(f"{where}: MultiRectangle needs a non-empty list of corner pairs")
        rects = []
        for i, pair in enumerate(coords):
            pts = _parse_position_list(pair, f"{where}.coordinates[{i}]", 2)
            if len(pts) != 2:
                raise SchemaError(f"{where}.coordinates[{i}]: expected exactly 2 corners")
            rects.append(pts)
        return RestrictionGeometry(kind, tuple(rects), repulsion)
    # MultiEllipse
    centers = _parse_position_list(coords, f"{where}.coordinates", 1)
    shapes_raw = obj["shape"]
    if not (isinstance(shapes_raw, list) and len(shapes_raw) == len(centers)):
        raise SchemaError(f"{where}: shape list length must match coordinates length")
    shapes = tuple(
        _parse_matrix(s, f"{where}.shape[{i}]") for i, s in enumerate(shapes_raw)
    )
    return RestrictionGeometry(kind, centers, repulsion, shape=shapes)


def _parse_daytime(v, where: str) -> float:
    """Seconds-of-day from a number or an HH:MM[:SS] string."""
    if _is_number(v):
        return float(v)
    if isinstance(v, str):
        parts = v.split(":")
        if len(parts) in (2, 3):
            try:
                nums = [float(p) for p in parts]
            except ValueError:
                raise SchemaError(f"{where}: bad time of day {v!r}") from None
            while len(nums) < 3:
                nums.append(0.0)
            return nums[0] * 3600 + nums[1] * 60 + nums[2]
    raise SchemaError(f"{where}: time of day must be seconds or 'HH:MM[:SS]', got {v!r}")


def _parse_window(obj, where: str) -> ActivationWindow:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected a window object")
    extra = set(obj) - {"start", "end", "daily_from", "daily_to"}
    if extra:
        raise SchemaError(f"{where}: unexpected keys {sorted(extra)}")
    start = end = None
    try:
        if "start" in obj:
            start = parse_timestamp(obj["start"])
        if "end" in obj:
            end = parse_timestamp(obj["end"])
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    daily_from = _parse_daytime(obj["daily_from"], where) if "daily_from" in obj else None
    daily_to = _parse_daytime(obj["daily_to"], where) if "daily_to" in obj else None
    return ActivationWindow(start=start, end=end, daily_from=daily_from, daily_to=daily_to)


def document_from_obj(obj) -> RestrictionDocument:
    """Validate an already-decoded JSON object as a restriction document."""
    if not isinstance(obj, dict):
        raise SchemaError("document must be a JSON object")
    geometry = _parse_geometry({k: v for k, v in obj.items() if k in _GEOM_KEYS})

    collection = obj.get("collection", DEFAULT_COLLECTION)
    if not (isinstance(collection, str) and collection):
        raise SchemaError("collection must be a non-empty string")

    properties = obj.get("properties", {})
    if not isinstance(properties, dict):
        raise SchemaError("properties must be an object")
    properties = dict(properties)
    for k, v in obj.items():
        if k not in _GEOM_KEYS and k not in _DOC_KEYS:
            properties.setdefault(k, v)

    windows_raw = obj.get("active_windows", [])
    if not isinstance(windows_raw, list):
        raise SchemaError("active_windows must be a list")
    windows = tuple(
        _parse_window(w, f"active_windows[{i}]") for i, w in enumerate(windows_raw)
    )

    doc_id = obj.get("id")
    if doc_id is None:
        doc_id = _content_id(geometry, collection, properties, windows)
    elif not (isinstance(doc_id, str) and doc_id):
        raise SchemaError("id must be a non-empty string")

    return RestrictionDocument(
        geometry=geometry,
        id=doc_id,
        collection=collection,
        properties=properties,
        active_windows=windows,
    )


def parse_document(text: Union[bytes, bytearray, str]) -> RestrictionDocument:
    """Parse and validate one UTF-8 RGeoJSON document."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"document is not UTF-8: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed document: {exc}") from None
    return document_from_obj(obj)


# ---------------------------------------------------------------------------
# Serialization


def _positions_obj(points) -> list:
    return [[p.x, p.y] for p in points]


def _geometry_obj(g: RestrictionGeometry) -> dict:
    out: dict = {"type": g.kind}
    if g.kind == "GeometryCollection":
        out["geometries"] = [_geometry_obj(m) for m in g.geometries]
        return out
    if g.kind in ("Point", "Ellipse"):
        out["coordinates"] = [g.coordinates.x, g.coordinates.y]
    elif g.kind in ("LineString", "MultiPoint", "Rectangle", "MultiEllipse"):
        out["coordinates"] = _positions_obj(g.coordinates)
    elif g.kind == "MultiLineString":
        out["coordinates"] = [_positions_obj(line) for line in g.coordinates]
    else:  # MultiRectangle
        out["coordinates"] = [_positions_obj(pair) for pair in g.coordinates]
    if g.kind == "Ellipse":
        out["shape"] = g.shape.rows()
    elif g.kind == "MultiEllipse":
        out["shape"] = [s.rows() for s in g.shape]
    out["repulsion"] = g.repulsion.rows()
    return out


def _daytime_obj(seconds: float):
    return int(seconds) if float(seconds).is_integer() else seconds


def _window_obj(w: ActivationWindow) -> dict:
    out: dict = {}
    if w.start is not None:
        out["start"] = w.start.isoformat().replace("+00:00", "Z")
    if w.end is not None:
        out["end"] = w.end.isoformat().replace("+00:00", "Z")
    if w.daily_from is not None:
        out["daily_from"] = _daytime_obj(w.daily_from)
        out["daily_to"] = _daytime_obj(w.daily_to)
    return out


def document_to_obj(doc: RestrictionDocument) -> dict:
    """Plain JSON-ready dict for a document; inverse of document_from_obj."""
    out = _geometry_obj(doc.geometry)
    out["id"] = doc.id
    out["collection"] = doc.collection
    if doc.properties:
        out["properties"] = doc.properties
    if doc.active_windows:
        out["active_windows"] = [_window_obj(w) for w in doc.active_windows]
    return out


def serialize_document(doc: RestrictionDocument) -> bytes:
    """UTF-8 JSON text that reparses to a structurally equal document."""
    return json.dumps(document_to_obj(doc), ensure_ascii=False).encode("utf-8")


def _content_id(geometry, collection, properties, windows) -> str:
    """Deterministic id for documents that arrive without one."""
    payload = {
        "g": _geometry_obj(geometry),
        "c": collection,
        "p": properties,
        "w": [_window_obj(w) for w in windows],
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return "r-" + hashlib.sha1(blob).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Compilation into field units


def _identity(lon: float, lat: float) -> Vec2:
    return Vec2(lon, lat)


def compile_units(
    doc: Union[RestrictionDocument, RestrictionGeometry],
    transform: Optional[Callable[[float, float], Vec2]] = None,
) -> list:
    """Flatten a document into field units, in document order.

    ``transform`` maps (longitude, latitude) into the evaluation plane (a
    local projection in meters for geographic use); positions are used as
    planar coordinates directly when it is omitted. Matrices pass through
    untouched — they are already stated in evaluation-plane units. Any
    per-axis monotone transform commutes with rectangle corner
    canonicalization.
    """
    t = transform or _identity
    g = doc.geometry if isinstance(doc, RestrictionDocument) else doc
    units: list = []
    _compile_into(g, t, units)
    return units


def _compile_into(g: RestrictionGeometry, t, out: list) -> None:
    k, a = g.kind, g.repulsion
    if k == "Point":
        out.append(PointUnit(t(g.coordinates.x, g.coordinates.y), a))
    elif k == "LineString":
        _compile_line(g.coordinates, t, a, out)
    elif k == "Rectangle":
        (p, q) = g.coordinates
        out.append(RectUnit(t(p.x, p.y), t(q.x, q.y), a))
    elif k == "Ellipse":
        out.append(EllipseUnit(t(g.coordinates.x, g.coordinates.y), g.shape, a))
    elif k == "MultiPoint":
        out.extend(PointUnit(t(p.x, p.y), a) for p in g.coordinates)
    elif k == "MultiLineString":
        for line in g.coordinates:
            _compile_line(line, t, a, out)
    elif k == "MultiRectangle":
        out.extend(RectUnit(t(p.x, p.y), t(q.x, q.y), a) for (p, q) in g.coordinates)
    elif k == "MultiEllipse":
        out.extend(
            EllipseUnit(t(p.x, p.y), b, a) for p, b in zip(g.coordinates, g.shape)
        )
    elif k == "GeometryCollection":
        for m in g.geometries:
            _compile_into(m, t, out)
    else:  # unreachable after validation
        raise SchemaError(f"unknown geometry kind {k!r}")


def _compile_line(points, t, a: Matrix2, out: list) -> None:
    # n positions become n-1 segments sharing one repulsion matrix.
    projected = [t(p.x, p.y) for p in points]
    out.extend(
        LineUnit(projected[i], projected[i + 1], a) for i in range(len(projected) - 1)
    )


def iter_positions(g: RestrictionGeometry) -> Iterator[Vec2]:
    """Every raw position in the geometry, in document order."""
    k = g.kind
    if k in ("Point", "Ellipse"):
        yield g.coordinates
    elif k in ("LineString", "MultiPoint", "Rectangle", "MultiEllipse"):
        yield from g.coordinates
    elif k in ("MultiLineString", "MultiRectangle"):
        for group in g.coordinates:
            yield from group
    else:
        for m in g.geometries:
            yield from iter_positions(m)


def reach_margin(g: RestrictionGeometry, k: float) -> float:
    """Worst-case distance (same units as the matrices) a constituent unit's
    energy stays above exp(-k^2) from its nearest raw position: k times the
    repulsion length scale, plus the major semi-axis for ellipses."""
    if g.kind == "GeometryCollection":
        return max(reach_margin(m, k) for m in g.geometries)
    margin = k * math.sqrt(g.repulsion.eigen_max())
    if g.kind == "Ellipse":
        margin += g.shape.eigen_max()
    elif g.kind == "MultiEllipse":
        margin += max(s.eigen_max() for s in g.shape)
    return margin


# ---------------------------------------------------------------------------
# Polygon approximation


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _orient(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1])
    d2 = _orient(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1])
    d3 = _orient(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])
    d4 = _orient(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1])
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True

    def on(a, b, c):
        return (
            _orient(a[0], a[1], b[0], b[1], c[0], c[1]) == 0
            and min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])
        )

    return on(p3, p4, p1) or on(p3, p4, p2) or on(p1, p2, p3) or on(p1, p2, p4)


def _validate_ring(ring) -> list:
    if not (isinstance(ring, (list, tuple)) and len(ring) >= 4):
        raise GeometryError("ring needs at least 4 positions (first == last)")
    pts = []
    for p in ring:
        v = _parse_position(list(p), "ring")
        pts.append((v.x, v.y))
    if pts[0] != pts[-1]:
        raise GeometryError("ring is open: first and last positions differ")
    pts = pts[:-1]
    n = len(pts)
    for i in range(n):
        if pts[i] == pts[(i + 1) % n]:
            raise GeometryError("ring has a zero-length edge")
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared-endpoint neighbors
            b1, b2 = pts[j], pts[(j + 1) % n]
            if _segments_intersect(a1, a2, b1, b2):
                raise GeometryError("ring is self-intersecting")
    return pts


def _corners_inside(pts, gx, gy) -> np.ndarray:
    """Even-odd ray-cast over the full corner lattice at once."""
    X, Y = np.meshgrid(gx, gy)
    inside = np.zeros(X.shape, dtype=bool)
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (Y >= min(y1, y2)) & (Y < max(y1, y2))
        xint = x1 + (Y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (X < xint)
    return inside


def _mark_edges(pts, covered, minx, miny, cw, ch) -> None:
    """Conservatively mark every cell a ring edge passes through."""
    ny, nx = covered.shape
    for i in range(len(pts)):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % len(pts)]
        steps = int(max(abs(x2 - x1) / cw, abs(y2 - y1) / ch) * 4) + 1
        ts = np.linspace(0.0, 1.0, steps + 1)
        ix = np.clip(((x1 + (x2 - x1) * ts) - minx) // cw, 0, nx - 1).astype(np.int64)
        iy = np.clip(((y1 + (y2 - y1) * ts) - miny) // ch, 0, ny - 1).astype(np.int64)
        covered[iy, ix] = True
        # Steps are < one cell per axis; when both indices change at once the
        # segment clipped a corner, so mark both elbow cells too.
        corner = (np.abs(np.diff(ix)) > 0) & (np.abs(np.diff(iy)) > 0)
        if corner.any():
            covered[iy[:-1][corner], ix[1:][corner]] = True
            covered[iy[1:][corner], ix[:-1][corner]] = True


def _row_spans(row: np.ndarray) -> tuple:
    """Maximal runs of covered cells in one raster row, as (start, stop) pairs."""
    idx = np.flatnonzero(row)
    if idx.size == 0:
        return ()
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[breaks + 1]))
    stops = np.concatenate((idx[breaks] + 1, [idx[-1] + 1]))
    return tuple(zip(starts.tolist(), stops.tolist()))


def _decompose(covered: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> list:
    """Merge vertically identical rows into axis-aligned rectangles."""
    rects = []
    row_spans = [_row_spans(covered[j]) for j in range(covered.shape[0])]
    j = 0
    while j < len(row_spans):
        spans = row_spans[j]
        j2 = j + 1
        while j2 < len(row_spans) and row_spans[j2] == spans:
            j2 += 1
        for (i0, i1) in spans:
            rects.append((gx[i0], gy[j], gx[i1], gy[j2]))
        j = j2
    return rects


def approximate_polygon(
    ring: Sequence,
    budget: int,
    resolution: int = POLYGON_RESOLUTION,
    repulsion: Optional[Matrix2] = None,
    collection: str = "polygon-approx",
) -> list:
    """Cover a simple polygon with at most ``budget`` Rectangle documents.

    The ring is rasterized at ``resolution`` cells per axis; every cell the
    polygon touches is marked (interior corners plus a conservative edge
    walk), and vertically identical rows merge into rectangles. If that
    yields more than ``budget`` rectangles the resolution is halved and the
    pass repeats — at resolution 1 the cover is the bounding box, so the
    budget is always met. The union always covers the polygon; rows are
    disjoint, so total area never exceeds the bounding-box area.
    """
    if budget < 1:
        raise GeometryError(f"budget must be at least 1, got {budget}")
    pts = _validate_ring(ring)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    minx, maxx, miny, maxy = min(xs), max(xs), min(ys), max(ys)
    if minx == maxx or miny == maxy:
        raise GeometryError("ring has zero area")

    a = repulsion if repulsion is not None else Matrix2.diagonal(1.0, 1.0)
    res = max(int(resolution), 1)
    while True:
        gx = np.linspace(minx, maxx, res + 1)
        gy = np.linspace(miny, maxy, res + 1)
        inside = _corners_inside(pts, gx, gy)
        covered = inside[:-1, :-1] | inside[1:, :-1] | inside[:-1, 1:] | inside[1:, 1:]
        _mark_edges(pts, covered, minx, miny, (maxx - minx) / res, (maxy - miny) / res)
        rects = _decompose(covered, gx, gy)
        if len(rects) <= budget or res == 1:
            break
        res //= 2

    ring_blob = json.dumps([[x, y] for x, y in pts]).encode()
    stem = hashlib.sha1(ring_blob).hexdigest()[:10]
    docs = []
    for i, (x0, y0, x1, y1) in enumerate(rects):
        geometry = RestrictionGeometry(
            kind="Rectangle",
            coordinates=(Vec2(x0, y0), Vec2(x1, y1)),
            repulsion=a,
        )
        docs.append(
            RestrictionDocument(
                geometry=geometry,
                id=f"poly-{stem}-{i:04d}",
                collection=collection,
                properties={"source": "polygon-approximation"},
            )
        )
    return docs


# ---------------------------------------------------------------------------
# Point-dataset ingestion


def ingest_point_dataset(
    records: Sequence, collection: str, default_A
) -> list:
    """One Point document per (longitude, latitude, name) record."""
    if not (isinstance(collection, str) and collection):
        raise SchemaError("collection must be a non-empty string")
    if isinstance(default_A, Matrix2):
        a = default_A
    else:
        a = _parse_matrix(
            [list(r) for r in default_A] if not isinstance(default_A, list) else default_A,
            "default_A",
        )
    docs = []
    for i, rec in enumerate(records):
        lon, lat, name = rec[0], rec[1], rec[2] if len(rec) > 2 else ""
        if not (_is_number(lon) and _is_number(lat)):
            raise RangeError(f"record {i}: coordinates must be numbers")
        if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
            raise RangeError(f"record {i}: ({lon}, {lat}) outside lon/lat range")
        geometry = RestrictionGeometry(
            kind="Point", coordinates=Vec2(float(lon), float(lat)), repulsion=a
        )
        seed = f"{collection}|{i}|{lon!r}|{lat!r}|{name}".encode("utf-8")
        docs.append(
            RestrictionDocument(
                geometry=geometry,
                id=f"pt-{hashlib.sha1(seed).hexdigest()[:12]}",
                collection=collection,
                properties={"name": str(name)} if name else {},
            )
        )
    return docs


def read_point_records(text: Union[bytes, str], delimiter: str = ",") -> list:
    """Decode delimiter-separated point records: lon, lat [, name]."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"records are not UTF-8: {exc}") from None
    out = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text), delimiter=delimiter), 1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 2:
            raise ParseError(f"line {lineno}: need at least lon and lat")
        try:
            lon, lat = float(row[0]), float(row[1])
        except ValueError:
            raise ParseError(f"line {lineno}: bad coordinate in {row[:2]!r}") from None
        name = row[2].strip() if len(row) > 2 else ""
        out.append((lon, lat, name))
    return out
