"""Operator command line: serve, ingest, eval, render, route.

Exit codes are part of the contract: 0 success, 2 unusable flags/config/
input, 3 port bind failure, 4 no route found, 5 validation verdict is
Violation in --validate-only mode.

Offline commands funnel through the exact code paths the server uses (same
store assembly, same projection anchoring, same kernels), so their answers
match the corresponding endpoints bit for bit on a frozen store.
"""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ServiceConfig, load_config
from .field import sample_grid
from .geo import GeoBBox, parse_timestamp
from .rgeojson import (
    Matrix2,
    RGeoJSONError,
    ingest_point_dataset,
    read_point_records,
)
from .routing import (
    DegenerateRequest,
    NoRoute,
    OutOfBounds,
    PlannerConfig,
    plan_route_geo,
    validate_route,
)
from .store import DuplicateId, SpatialIndex, StoreError
from .units import Vec2

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BIND = 3
EXIT_NO_ROUTE = 4
EXIT_VIOLATION = 5


class CliError(Exception):
    """Operator-facing failure; message goes to stderr, exit code attached."""

    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _format_energy(e: float) -> str:
    """Nine significant digits; plain zero keeps a full-width mantissa."""
    return "0.000000000" if e == 0.0 else f"{e:#.9g}"


def _parse_latlon(text: str, what: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise CliError(f"{what} must be lat,lon — got {text!r}")
    try:
        lat, lon = float(parts[0]), float(parts[1])
    except ValueError:
        raise CliError(f"{what} must be numeric lat,lon — got {text!r}") from None
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise CliError(f"{what} ({lat}, {lon}) out of range")
    return (lat, lon)


def _parse_bbox(text: str) -> GeoBBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise CliError(f"bbox must be min_lon,min_lat,max_lon,max_lat — got {text!r}")
    try:
        min_lon, min_lat, max_lon, max_lat = (float(p) for p in parts)
        return GeoBBox(min_lon=min_lon, min_lat=min_lat, max_lon=max_lon, max_lat=max_lat)
    except ValueError as exc:
        raise CliError(f"bad bbox: {exc}") from None


def _parse_matrix_flag(text: str) -> Matrix2:
    """Accepts [[a,b],[c,d]] JSON or a flat a11,a12,a21,a22 list."""
    try:
        rows = json.loads(text)
    except json.JSONDecodeError:
        parts = text.split(",")
        if len(parts) != 4:
            raise CliError(
                f"repulsion must be [[a,b],[c,d]] or a11,a12,a21,a22 — got {text!r}"
            ) from None
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise CliError(f"repulsion entries must be numbers — got {text!r}") from None
        rows = [nums[:2], nums[2:]]
    try:
        return Matrix2.from_rows(rows)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad repulsion matrix: {exc}") from None


def _collections(arg: str | None) -> list[str] | None:
    if arg is None:
        return None
    names = [n.strip() for n in arg.split(",") if n.strip()]
    if not names:
        raise CliError("collections flag given but empty")
    return names


def _load_context(args) -> tuple[ServiceConfig, SpatialIndex]:
    try:
        cfg = load_config(args.config) if args.config else ServiceConfig()
    except ConfigError as exc:
        raise CliError(f"config: {exc}") from None
    store_path = args.store or cfg.store_path
    try:
        if store_path and (Path(store_path) / "manifest.json").exists():
            store = SpatialIndex.load_snapshot(
                store_path,
                reach_k=cfg.reach_k,
                r_sep=cfg.separation_m,
                max_ttl=cfg.max_ttl_s,
                utc_offset=cfg.utc_offset_s,
            )
        else:
            store = SpatialIndex(
                reach_k=cfg.reach_k,
                r_sep=cfg.separation_m,
                max_ttl=cfg.max_ttl_s,
                utc_offset=cfg.utc_offset_s,
            )
    except StoreError as exc:
        raise CliError(f"store: {exc}") from None
    return cfg, store


def _parse_t(arg):
    if arg is None:
        return None
    try:
        return parse_timestamp(arg)
    except ValueError as exc:
        raise CliError(str(exc)) from None


# ---------------------------------------------------------------------------
# Subcommands


def cmd_serve(args) -> int:
    cfg, store = _load_context(args)
    store_path = args.store or cfg.store_path
    if store_path and not Path(store_path).exists():
        if args.init:
            store.save_snapshot(store_path)
        else:
            raise CliError(f"store path {store_path!r} does not exist (use --init)")

    host = args.host or cfg.host
    port = args.port or cfg.port
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        raise CliError(f"cannot bind {host}:{port}: {exc}", EXIT_BIND) from None
    finally:
        probe.close()

    import uvicorn

    from .server import create_app

    logging.basicConfig(level=logging.INFO, format="%(name)s %(message)s")
    if not cfg.api_keys:
        logging.getLogger("fieldspace.cli").warning(
            "no api_keys configured; every request will be rejected"
        )
    app = create_app(store, cfg)
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return EXIT_OK


def cmd_ingest(args) -> int:
    _, store = _load_context(args)
    if not args.store:
        raise CliError("ingest needs --store to persist the documents")
    try:
        text = Path(args.records).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read records: {exc}") from None
    try:
        records = read_point_records(text, delimiter=args.delimiter)
        docs = ingest_point_dataset(records, args.collection, _parse_matrix_flag(args.repulsion))
    except RGeoJSONError as exc:
        raise CliError(str(exc)) from None
    inserted = skipped = 0
    for doc in docs:
        try:
            store.insert(doc)
            inserted += 1
        except DuplicateId:
            if not args.skip_duplicates:
                raise CliError(f"duplicate id {doc.id!r} (use --skip-duplicates)") from None
            skipped += 1
    store.save_snapshot(args.store)
    if skipped:
        print(f"inserted {inserted}, skipped {skipped}")
    else:
        print(f"inserted {inserted}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _, store = _load_context(args)
    lat, lon = args.lat, args.lon
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise CliError(f"({lat}, {lon}) out of range")
    region = GeoBBox(min_lon=lon, min_lat=lat, max_lon=lon, max_lat=lat)
    try:
        fld = store.effective_field(region, _collections(args.collections), _parse_t(args.t))
    except StoreError as exc:
        raise CliError(str(exc)) from None
    from .field import eval_composite

    print(_format_energy(eval_composite(fld, Vec2(0.0, 0.0))))
    return EXIT_OK


def cmd_render(args) -> int:
    _, store = _load_context(args)
    region = _parse_bbox(args.bbox)
    try:
        fld = store.effective_field(region, _collections(args.collections), _parse_t(args.t))
    except StoreError as exc:
        raise CliError(str(exc)) from None
    proj = store.projection_for(region)
    try:
        values = sample_grid(
            fld,
            (
                proj.to_local(region.min_lon, region.min_lat),
                proj.to_local(region.max_lon, region.max_lat),
            ),
            args.nx,
            args.ny,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    pixels = np.rint(values * 255.0).astype(np.uint8)[::-1, :]  # row 0 = north
    header = f"P5\n{args.nx} {args.ny}\n255\n".encode("ascii")
    try:
        Path(args.out).write_bytes(header + pixels.tobytes())
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}") from None
    return EXIT_OK


def _print_report(report) -> None:
    cost = "inf" if report.energy_cost == float("inf") else f"{report.energy_cost:.6f}"
    print(f"verdict: {report.verdict}")
    print(f"energy_cost: {cost}")
    print(f"peak_energy: {report.peak_energy:.9f}")
    if report.peak_latlon is not None:
        print(f"peak_location: {report.peak_latlon[0]:.7f},{report.peak_latlon[1]:.7f}")
    print(f"length_m: {report.length:.3f}")


def cmd_route(args) -> int:
    _, store = _load_context(args)
    names = _collections(args.collections)
    t = _parse_t(args.t)
    try:
        cfg = PlannerConfig(cell_size=args.cell_size, energy_weight=args.energy_weight)
    except ValueError as exc:
        raise CliError(str(exc)) from None

    if args.validate_only:
        if not args.waypoints:
            raise CliError("--validate-only needs --waypoints lat,lon;lat,lon;...")
        pts = [_parse_latlon(p, "waypoint") for p in args.waypoints.split(";") if p]
        if len(pts) < 2:
            raise CliError("need at least 2 waypoints")
        try:
            report = validate_route(store, pts, names, t, cfg)
        except (StoreError, RGeoJSONError, ValueError) as exc:
            raise CliError(str(exc)) from None
        _print_report(report)
        return EXIT_OK if report.verdict == "Compliant" else EXIT_VIOLATION

    if not (args.start and args.goal):
        raise CliError("route needs --start and --goal (lat,lon)")
    start = _parse_latlon(args.start, "start")
    goal = _parse_latlon(args.goal, "goal")
    try:
        latlon, report = plan_route_geo(store, start, goal, names, t, cfg)
    except NoRoute as exc:
        raise CliError(str(exc), EXIT_NO_ROUTE) from None
    except (OutOfBounds, DegenerateRequest) as exc:
        raise CliError(str(exc)) from None
    except (StoreError, RGeoJSONError, ValueError) as exc:
        raise CliError(str(exc)) from None
    for lat, lon in latlon:
        print(f"{lat!r},{lon!r}")
    _print_report(report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldspace",
        description="Potential-field airspace restrictions: serve, ingest, evaluate, render, route.",
    )
    parser.add_argument("--config", help="service config JSON path")
    parser.add_argument("--store", help="snapshot directory (overrides config store_path)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the REST service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--init", action="store_true", help="create the store path if missing")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("ingest", help="load delimiter-separated point records")
    p.add_argument("records", help="records file: lon,lat,name per line")
    p.add_argument("--collection", required=True)
    p.add_argument("--repulsion", required=True, help="[[a,b],[c,d]] or a11,a12,a21,a22")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--skip-duplicates", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("eval", help="print field energy at a point")
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--collections", help="comma-separated collection names")
    p.add_argument("--t", help="ISO-8601 evaluation time (default: now)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="write the field over a bbox as a binary PGM")
    p.add_argument("--bbox", required=True, help="min_lon,min_lat,max_lon,max_lat")
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--collections")
    p.add_argument("--t")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("route", help="plan or validate a route")
    p.add_argument("--start", help="lat,lon")
    p.add_argument("--goal", help="lat,lon")
    p.add_argument("--collections")
    p.add_argument("--t")
    p.add_argument("--cell-size", type=float, default=25.0, dest="cell_size")
    p.add_argument("--energy-weight", type=float, default=1.0, dest="energy_weight")
    p.add_argument("--validate-only", action="store_true")
    p.add_argument("--waypoints", help="lat,lon;lat,lon;... for --validate-only")
    p.set_defaults(func=cmd_route)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses its own exit code
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
