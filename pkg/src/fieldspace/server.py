"""REST service over a spatial store.

Endpoints: clearance check (/test), restriction queries by address (/adds)
and by disc (/locs), route validation and planning, client heartbeats,
field-grid sampling, and administrator insert/remove. Authentication is an
API key in the X-Api-Key header mapped to one of three clearance tiers;
every handler checks the tier before doing anything.

Responses are plain JSON; infinities are serialized as the string "inf"
because JSON has no number for them. Stored documents round-trip bit-exact;
temporary client units appear in a separate "ephemeral" section so the
document list stays reusable as-is.
"""

from __future__ import annotations

import logging
import math
import time
from datetime import datetime
from typing import Callable, Optional

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse

from .config import (
    ApiKey,
    ServiceConfig,
    TIER_ADMINISTRATOR,
    TIER_OBSERVER,
    TIER_OPERATOR,
)
from .field import DEFAULT_SAMPLE_CAP, sample_grid
from .geo import GeoBBox, parse_timestamp
from .routing import (
    DegenerateRequest,
    NoRoute,
    OutOfBounds,
    PlannerConfig,
    ComplianceReport,
    plan_route_geo,
    validate_route,
)
from .rgeojson import RGeoJSONError, document_from_obj, document_to_obj
from .store import (
    DuplicateId,
    SpatialIndex,
    TemporaryUnit,
    TtlRange,
    UnknownCollection,
    UnknownId,
)

__all__ = ["create_app", "ApiError"]

log = logging.getLogger("fieldspace.server")


class ApiError(Exception):
    """Carries an HTTP status and a one-line message to the error handler."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _num(x: float):
    """JSON-safe number: infinities become the string "inf"."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _report_obj(report: ComplianceReport) -> dict:
    out = {
        "verdict": report.verdict,
        "energy_cost": _num(report.energy_cost),
        "peak_energy": report.peak_energy,
        "length": report.length,
    }
    if report.peak_latlon is not None:
        # wire positions are [longitude, latitude]
        out["peak_location"] = [report.peak_latlon[1], report.peak_latlon[0]]
    else:
        out["peak_location"] = [report.peak_location.x, report.peak_location.y]
    return out


def _temporary_obj(u: TemporaryUnit) -> dict:
    major, minor = u.semi_axes
    return {
        "client": u.client,
        "position": [u.lon, u.lat],
        "heading": [u.heading_east, u.heading_north],
        "speed": u.speed,
        "ttl": u.ttl,
        "expires_at": u.expires_at.isoformat().replace("+00:00", "Z"),
        "semi_axes": [major, minor],
    }


def _split_dbs(dbs: str) -> list[str]:
    names = [part.strip() for part in dbs.split(",")]
    names = [n for n in names if n]
    if not names:
        raise ApiError(400, "no collection names given")
    return names


def _body_dbs(value) -> Optional[list[str]]:
    """Body "dbs" is either a comma-separated string or a list of names."""
    if value is None:
        return None
    if isinstance(value, str):
        return _split_dbs(value)
    if isinstance(value, list) and all(isinstance(n, str) and n for n in value):
        if not value:
            raise ApiError(400, "no collection names given")
        return value
    raise ApiError(400, "dbs must be a comma-separated string or a list of names")


def _parse_t(value) -> Optional[datetime]:
    if value is None:
        return None
    try:
        return parse_timestamp(value)
    except ValueError as exc:
        raise ApiError(400, f"bad timestamp: {exc}") from None


def _parse_position(value, what: str) -> tuple[float, float]:
    """Wire position [lon, lat] -> (lat, lon)."""
    ok = (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value)
    )
    if not ok:
        raise ApiError(400, f"{what} must be a [longitude, latitude] pair")
    lon, lat = float(value[0]), float(value[1])
    if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
        raise ApiError(400, f"{what} ({lon}, {lat}) out of range")
    return (lat, lon)


def _parse_cfg(value) -> PlannerConfig:
    if value is None:
        return PlannerConfig()
    if not isinstance(value, dict):
        raise ApiError(400, "cfg must be an object")
    allowed = {"cell_size", "energy_weight", "e_block", "e_violation"}
    extra = set(value) - allowed
    if extra:
        raise ApiError(400, f"cfg has unknown keys {sorted(extra)}")
    try:
        return PlannerConfig(**{k: float(v) for k, v in value.items()})
    except (TypeError, ValueError) as exc:
        raise ApiError(400, f"bad cfg: {exc}") from None


def create_app(
    store: SpatialIndex,
    config: Optional[ServiceConfig] = None,
    clock: Optional[Callable[[], datetime]] = None,
) -> FastAPI:
    """Wire a FastAPI application around one store and one config.

    ``clock`` overrides the time source for request handling (tests freeze
    it); the store keeps its own clock for ttl bookkeeping, so pass the same
    callable to both when determinism matters.
    """
    config = config or ServiceConfig()
    now = clock or store.now

    app = FastAPI(title="fieldspace", docs_url=None, redoc_url=None, openapi_url=None)

    # -- plumbing -----------------------------------------------------------

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.middleware("http")
    async def _log_requests(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        log.info(
            "%s %s %d %.1fms", request.method, request.url.path, response.status_code, elapsed_ms
        )
        return response

    def auth(request: Request, tier: str) -> ApiKey:
        entry = config.key_entry(request.headers.get("X-Api-Key"))
        if entry is None:
            raise ApiError(401, "missing or unknown API key")
        if not entry.allows(tier):
            raise ApiError(403, f"{entry.tier} clearance cannot use this endpoint")
        return entry

    def resolve_address(adds: str) -> Optional[tuple[float, float, float]]:
        return config.addresses.lookup(adds)

    def run_query(center: tuple[float, float], radius: float, dbs: str, t_param) -> dict:
        t = _parse_t(t_param) or now()
        try:
            docs = store.query_radius(center, radius, _split_dbs(dbs), t)
            temps = store.temporaries_near(center, radius, t)
        except UnknownCollection as exc:
            raise ApiError(400, str(exc)) from None
        return {
            "documents": [document_to_obj(d) for d in docs],
            "ephemeral": [_temporary_obj(u) for u in temps],
        }

    # -- endpoints ----------------------------------------------------------

    @app.get("/test/{adds}")
    def test_clearance(adds: str, request: Request):
        entry = auth(request, TIER_OBSERVER)
        known = resolve_address(adds) is not None
        if config.strict_addresses and not known:
            raise ApiError(404, f"unknown address {adds!r}")
        return {"client": entry.client, "tier": entry.tier, "address_known": known}

    @app.get("/adds/{adds}/{dbs}")
    def query_by_address(adds: str, dbs: str, request: Request, t: Optional[str] = None):
        auth(request, TIER_OBSERVER)
        entry = resolve_address(adds)
        if entry is None:
            raise ApiError(404, f"unknown address {adds!r}")
        lat, lon, radius = entry
        return run_query((lat, lon), radius, dbs, t)

    @app.get("/locs/{coords}/{dbs}")
    def query_by_location(coords: str, dbs: str, request: Request, t: Optional[str] = None):
        auth(request, TIER_OBSERVER)
        parts = coords.split(",")
        if len(parts) != 3:
            raise ApiError(400, "expected /locs/{lat},{lon},{radius}/{dbs}")
        try:
            lat, lon, radius = (float(p) for p in parts)
        except ValueError:
            raise ApiError(400, f"malformed lat,lon,radius segment {coords!r}") from None
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ApiError(400, f"({lat}, {lon}) out of range")
        if not radius > 0:
            raise ApiError(400, f"radius must be positive, got {radius}")
        return run_query((lat, lon), radius, dbs, t)

    @app.post("/routes/validate")
    def routes_validate(request: Request, body: dict = Body(...)):
        auth(request, TIER_OPERATOR)
        route = body.get("route")
        if not isinstance(route, list) or len(route) < 2:
            raise ApiError(400, "route must list at least 2 [lon, lat] waypoints")
        waypoints = [_parse_position(p, f"route[{i}]") for i, p in enumerate(route)]
        names = _body_dbs(body.get("dbs"))
        t = _parse_t(body.get("t")) or now()
        try:
            report = validate_route(store, waypoints, names, t, _parse_cfg(body.get("cfg")))
        except UnknownCollection as exc:
            raise ApiError(400, str(exc)) from None
        except (RGeoJSONError, ValueError) as exc:
            raise ApiError(400, str(exc)) from None
        return _report_obj(report)

    @app.post("/routes/plan")
    def routes_plan(request: Request, body: dict = Body(...)):
        auth(request, TIER_OPERATOR)
        start = _parse_position(body.get("start"), "start")
        goal = _parse_position(body.get("goal"), "goal")
        names = _body_dbs(body.get("dbs"))
        t = _parse_t(body.get("t")) or now()
        try:
            latlon, report = plan_route_geo(
                store, start, goal, names, t, _parse_cfg(body.get("cfg"))
            )
        except UnknownCollection as exc:
            raise ApiError(400, str(exc)) from None
        except NoRoute as exc:
            raise ApiError(409, str(exc)) from None
        except (OutOfBounds, DegenerateRequest) as exc:
            raise ApiError(400, str(exc)) from None
        except (RGeoJSONError, ValueError) as exc:
            raise ApiError(400, str(exc)) from None
        return {
            "route": [[lon, lat] for lat, lon in latlon],
            "report": _report_obj(report),
        }

    @app.post("/clients/{client_id}/state")
    def client_state(client_id: str, request: Request, body: dict = Body(...)):
        entry = auth(request, TIER_OPERATOR)
        if entry.client != client_id:
            raise ApiError(403, "key does not belong to this client id")
        lat, lon = _parse_position(body.get("position"), "position")
        heading = body.get("heading")
        ok = (
            isinstance(heading, (list, tuple))
            and len(heading) == 2
            and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in heading)
        )
        if not ok:
            raise ApiError(400, "heading must be an [east, north] pair")
        speed = body.get("speed", 0.0)
        if not (isinstance(speed, (int, float)) and not isinstance(speed, bool)) or speed < 0:
            raise ApiError(400, "speed must be a nonnegative number")
        ttl = body.get("ttl", config.default_ttl_s)
        if not (isinstance(ttl, (int, float)) and not isinstance(ttl, bool)):
            raise ApiError(400, "ttl must be a number of seconds")
        try:
            temp = store.upsert_temporary(
                client_id, (lat, lon), (float(heading[0]), float(heading[1])), float(speed), float(ttl)
            )
        except (TtlRange, ValueError) as exc:
            raise ApiError(400, str(exc)) from None
        return {"ok": True, "expires_at": temp.expires_at.isoformat().replace("+00:00", "Z")}

    @app.get("/fields/grid")
    def fields_grid(
        request: Request,
        bbox: str,
        nx: int,
        ny: int,
        dbs: Optional[str] = None,
        t: Optional[str] = None,
    ):
        auth(request, TIER_OBSERVER)
        parts = bbox.split(",")
        if len(parts) != 4:
            raise ApiError(400, "bbox must be min_lon,min_lat,max_lon,max_lat")
        try:
            min_lon, min_lat, max_lon, max_lat = (float(p) for p in parts)
            region = GeoBBox(min_lon=min_lon, min_lat=min_lat, max_lon=max_lon, max_lat=max_lat)
        except ValueError as exc:
            raise ApiError(400, f"bad bbox: {exc}") from None
        names = _split_dbs(dbs) if dbs else None
        when = _parse_t(t) or now()
        try:
            fld = store.effective_field(region, names, when)
        except UnknownCollection as exc:
            raise ApiError(400, str(exc)) from None
        proj = store.projection_for(region)
        try:
            values = sample_grid(
                fld,
                (proj.to_local(min_lon, min_lat), proj.to_local(max_lon, max_lat)),
                nx,
                ny,
                cap=DEFAULT_SAMPLE_CAP,
            )
        except ValueError as exc:
            raise ApiError(400, str(exc)) from None
        # row 0 is the south (min latitude) edge
        return {
            "bbox": [min_lon, min_lat, max_lon, max_lat],
            "nx": nx,
            "ny": ny,
            "values": [row.tolist() for row in values],
        }

    @app.post("/restrictions", status_code=201)
    def insert_restriction(request: Request, body: dict = Body(...)):
        auth(request, TIER_ADMINISTRATOR)
        try:
            doc = document_from_obj(body)
            store.insert(doc)
        except RGeoJSONError as exc:
            raise ApiError(400, str(exc)) from None
        except DuplicateId as exc:
            raise ApiError(409, str(exc)) from None
        return {"id": doc.id, "collection": doc.collection}

    @app.delete("/restrictions/{doc_id}")
    def delete_restriction(doc_id: str, request: Request):
        auth(request, TIER_ADMINISTRATOR)
        try:
            store.remove(doc_id)
        except UnknownId as exc:
            raise ApiError(404, str(exc)) from None
        return {"removed": doc_id}

    return app
