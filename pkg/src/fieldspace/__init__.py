"""Repulsive potential fields for low-altitude airspace restriction management.

Restrictions are repulsive potential units (points, segments, rectangles,
ellipses) whose energies compose by pointwise max into a field over local
ground coordinates. The package parses the restriction interchange format,
stores documents in a geographic index, evaluates and renders fields,
validates routes by integrating transformed energy, plans low-energy routes
on a grid, and serves everything over REST.
"""

from .field import (
    eval_composite,
    eval_composite_many,
    eval_unit,
    grad_composite,
    sample_grid,
    transform_energy,
)
from .geo import GeoBBox, LocalProjection, parse_timestamp
from .kernels import BACKEND
from .rgeojson import (
    ActivationWindow,
    GeometryError,
    MatrixError,
    ParseError,
    RangeError,
    RestrictionDocument,
    RestrictionGeometry,
    RGeoJSONError,
    SchemaError,
    approximate_polygon,
    compile_units,
    ingest_point_dataset,
    parse_document,
    read_point_records,
    serialize_document,
)
from .routing import (
    COMPLIANT,
    VIOLATION,
    ComplianceReport,
    DegenerateRequest,
    NoRoute,
    OutOfBounds,
    PlannerConfig,
    Route,
    RoutingError,
    plan_route,
    plan_route_geo,
    route_energy,
    validate_route,
)
from .store import (
    DuplicateId,
    SpatialIndex,
    StoreError,
    TtlRange,
    UnknownCollection,
    UnknownId,
)
from .units import (
    CompositeField,
    EllipseUnit,
    FieldUnit,
    LineUnit,
    Matrix2,
    PointUnit,
    RectUnit,
    Vec2,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationWindow",
    "BACKEND",
    "COMPLIANT",
    "ComplianceReport",
    "CompositeField",
    "DegenerateRequest",
    "DuplicateId",
    "EllipseUnit",
    "FieldUnit",
    "GeoBBox",
    "GeometryError",
    "LineUnit",
    "LocalProjection",
    "Matrix2",
    "MatrixError",
    "NoRoute",
    "OutOfBounds",
    "ParseError",
    "PlannerConfig",
    "PointUnit",
    "RGeoJSONError",
    "RangeError",
    "RectUnit",
    "RestrictionDocument",
    "RestrictionGeometry",
    "Route",
    "RoutingError",
    "SchemaError",
    "SpatialIndex",
    "StoreError",
    "TtlRange",
    "UnknownCollection",
    "UnknownId",
    "VIOLATION",
    "Vec2",
    "approximate_polygon",
    "compile_units",
    "eval_composite",
    "eval_composite_many",
    "eval_unit",
    "grad_composite",
    "ingest_point_dataset",
    "parse_document",
    "parse_timestamp",
    "plan_route",
    "plan_route_geo",
    "read_point_records",
    "route_energy",
    "sample_grid",
    "serialize_document",
    "transform_energy",
    "validate_route",
]
