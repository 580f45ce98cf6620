"""Route compliance scoring and low-energy route planning.

Compliance: the cost of a route is the line integral of the transformed
energy along arc length (meters of equivalent-violation exposure),
approximated with the composite trapezoid rule. Any sample at or above the
violation threshold makes the cost infinite, so the verdict, the peak energy
test, and cost divergence are one and the same check.

Planning: A* over an 8-connected grid of cell centers. A move costs
ds * (1 + lambda * T(E_mid)) with E_mid the energy at the move's midpoint;
cells at or above the blocking threshold are impassable. The heuristic is the
Euclidean distance deflated by one part in 1e9, which keeps it admissible
under floating-point summation, so grid-optimal cost matches an independent
shortest-path solver bit for bit. Grids, weights, and tie-breaking are fully
deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .field import eval_composite_many
from .geo import GeoBBox, LocalProjection
from .rgeojson import RangeError
from .units import CompositeField, Vec2

__all__ = [
    "RoutingError",
    "NoRoute",
    "OutOfBounds",
    "DegenerateRequest",
    "Route",
    "ComplianceReport",
    "PlannerConfig",
    "route_energy",
    "validate_route",
    "plan_route",
    "plan_route_geo",
    "COMPLIANT",
    "VIOLATION",
]

COMPLIANT = "Compliant"
VIOLATION = "Violation"

# Planner grid cap, matching the field sampling cap.
MAX_GRID_CELLS = 4_000_000

# Heuristic deflation: keeps Euclidean admissible under float summation.
_H_DEFLATE = 1.0 - 1e-9


class RoutingError(Exception):
    """Base class for planning/validation errors."""


class NoRoute(RoutingError):
    """The goal is unreachable below the blocking threshold."""


class OutOfBounds(RoutingError):
    """Start or goal lies in a blocked cell."""


class DegenerateRequest(RoutingError):
    """Start and goal coincide (same point or same grid cell)."""


@dataclass(frozen=True)
class Route:
    """An ordered polyline in projected meters."""

    waypoints: tuple[Vec2, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if len(self.waypoints) < 2:
            raise ValueError("a route needs at least 2 waypoints")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if a == b:
                raise ValueError(f"consecutive duplicate waypoint {a}")

    @cached_property
    def length(self) -> float:
        return sum((b - a).norm() for a, b in zip(self.waypoints, self.waypoints[1:]))


@dataclass(frozen=True)
class ComplianceReport:
    """Outcome of scoring one route against one field snapshot."""

    verdict: str
    energy_cost: float
    peak_energy: float
    peak_location: Vec2
    length: float
    peak_latlon: Optional[tuple[float, float]] = None  # (lat, lon) for geo routes

    @property
    def compliant(self) -> bool:
        return self.verdict == COMPLIANT


@dataclass(frozen=True)
class PlannerConfig:
    """Planner and compliance knobs.

    ``energy_weight`` is the lambda multiplier trading route length against
    transformed-energy exposure; ``e_block`` blocks planner cells and
    ``e_violation`` fails validation, equal by default so the two stages
    agree on what a violation is.
    """

    cell_size: float = 25.0
    energy_weight: float = 1.0
    e_block: float = 0.999
    e_violation: float = 0.999
    connectivity: int = 8

    def __post_init__(self) -> None:
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size!r}")
        if not self.energy_weight >= 0:
            raise ValueError(f"energy_weight must be nonnegative, got {self.energy_weight!r}")
        if not 0.0 < self.e_block <= 1.0:
            raise ValueError(f"e_block must lie in (0, 1], got {self.e_block!r}")
        if not 0.0 < self.e_violation <= 1.0:
            raise ValueError(f"e_violation must lie in (0, 1], got {self.e_violation!r}")
        if self.connectivity != 8:
            raise ValueError("only 8-connected grids are supported")

    @property
    def sample_step(self) -> float:
        """Compliance sampling interval: a quarter cell."""
        return self.cell_size / 4.0


def _transform_arr(e: np.ndarray, cutoff: float) -> np.ndarray:
    """Vectorized -ln(1-e) with +inf at or above the cutoff."""
    out = np.full(e.shape, np.inf)
    ok = e < cutoff
    out[ok] = -np.log1p(-e[ok])
    return out


# ---------------------------------------------------------------------------
# Compliance


def route_energy(
    field: CompositeField,
    route: Route,
    step: Optional[float] = None,
    e_violation: float = 0.999,
) -> ComplianceReport:
    """Trapezoid approximation of the transformed-energy line integral.

    Each segment is sampled at intervals no longer than ``step``; the peak
    sample decides the verdict, and any sample at or above ``e_violation``
    drives the cost to +inf.
    """
    if step is None:
        step = PlannerConfig().sample_step
    if not step > 0:
        raise ValueError(f"step must be positive, got {step!r}")

    seg_counts = []
    xs_parts, ys_parts = [], []
    lengths = []
    for a, b in zip(route.waypoints, route.waypoints[1:]):
        seg_len = (b - a).norm()
        n = max(1, math.ceil(seg_len / step))
        ts = np.linspace(0.0, 1.0, n + 1)
        xs_parts.append(a.x + (b.x - a.x) * ts)
        ys_parts.append(a.y + (b.y - a.y) * ts)
        seg_counts.append(n)
        lengths.append(seg_len)

    xs = np.concatenate(xs_parts)
    ys = np.concatenate(ys_parts)
    energies = eval_composite_many(field, xs, ys)
    costs = _transform_arr(energies, e_violation)

    total = 0.0
    offset = 0
    for n, seg_len in zip(seg_counts, lengths):
        c = costs[offset : offset + n + 1]
        total += (seg_len / n) * (c[1:-1].sum() + 0.5 * (c[0] + c[-1]))
        offset += n + 1

    peak_i = int(np.argmax(energies))
    peak = float(energies[peak_i])
    verdict = VIOLATION if peak >= e_violation else COMPLIANT
    return ComplianceReport(
        verdict=verdict,
        energy_cost=float(total),
        peak_energy=peak,
        peak_location=Vec2(float(xs[peak_i]), float(ys[peak_i])),
        length=float(sum(lengths)),
    )


def _check_latlon(points: Sequence[tuple[float, float]], what: str) -> None:
    for lat, lon in points:
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise RangeError(f"{what} ({lat}, {lon}) outside lat/lon range")


def validate_route(
    store,
    waypoints: Sequence[tuple[float, float]],
    collections: Optional[Sequence[str]] = None,
    t: Optional[datetime] = None,
    cfg: Optional[PlannerConfig] = None,
) -> ComplianceReport:
    """Score a (lat, lon) route against the store's effective field.

    The field is assembled over the route's bounding box; document boxes are
    already reach-inflated, so every unit that matters along the route is
    included.
    """
    cfg = cfg or PlannerConfig()
    pts = [(float(lat), float(lon)) for lat, lon in waypoints]
    if len(pts) < 2:
        raise ValueError("a route needs at least 2 waypoints")
    _check_latlon(pts, "route waypoint")
    region = GeoBBox(
        min_lon=min(p[1] for p in pts),
        min_lat=min(p[0] for p in pts),
        max_lon=max(p[1] for p in pts),
        max_lat=max(p[0] for p in pts),
    )
    proj = store.projection_for(region)
    fld = store.effective_field(region, collections, t)
    route = Route(tuple(proj.to_local(lon, lat) for lat, lon in pts))
    report = route_energy(fld, route, cfg.sample_step, cfg.e_violation)
    peak_lon, peak_lat = proj.to_lonlat(report.peak_location)
    return replace(report, peak_latlon=(peak_lat, peak_lon))


# ---------------------------------------------------------------------------
# Planning


@dataclass(frozen=True)
class _Grid:
    """Cell-center lattice covering the start/goal box plus margin."""

    x0: float
    y0: float
    cell: float
    nx: int
    ny: int

    @classmethod
    def around(cls, start: Vec2, goal: Vec2, cfg: PlannerConfig) -> "_Grid":
        cs = cfg.cell_size
        mx = 0.25 * abs(goal.x - start.x) + 10.0 * cs
        my = 0.25 * abs(goal.y - start.y) + 10.0 * cs
        x0 = min(start.x, goal.x) - mx
        y0 = min(start.y, goal.y) - my
        nx = math.ceil((max(start.x, goal.x) + mx - x0) / cs) + 1
        ny = math.ceil((max(start.y, goal.y) + my - y0) / cs) + 1
        if nx * ny > MAX_GRID_CELLS:
            raise ValueError(
                f"planning grid {nx}x{ny} exceeds {MAX_GRID_CELLS} cells; "
                "increase cell_size or shorten the request"
            )
        return cls(x0=x0, y0=y0, cell=cs, nx=nx, ny=ny)

    def snap(self, p: Vec2) -> int:
        ix = min(max(int(round((p.x - self.x0) / self.cell)), 0), self.nx - 1)
        iy = min(max(int(round((p.y - self.y0) / self.cell)), 0), self.ny - 1)
        return iy * self.nx + ix

    def coords(self, idx: int) -> Vec2:
        iy, ix = divmod(int(idx), self.nx)
        return Vec2(self.x0 + ix * self.cell, self.y0 + iy * self.cell)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            self.x0 + self.cell * np.arange(self.nx, dtype=np.float64),
            self.y0 + self.cell * np.arange(self.ny, dtype=np.float64),
        )

    def bbox(self) -> tuple[Vec2, Vec2]:
        return (
            Vec2(self.x0, self.y0),
            Vec2(self.x0 + (self.nx - 1) * self.cell, self.y0 + (self.ny - 1) * self.cell),
        )


def _eval_lattice(fld: CompositeField, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    X, Y = np.meshgrid(gx, gy)
    return eval_composite_many(fld, X.ravel(), Y.ravel()).reshape(Y.shape[0], X.shape[1])


def _grid_weights(
    fld: CompositeField,
    grid: _Grid,
    cfg: PlannerConfig,
    extra_blocked: Sequence[int] = (),
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Edge-weight arrays (east, north, NE, NW) plus the cell energy grid.

    The same arrays feed both the production planner and any independent
    shortest-path solver, so cost comparisons are bit-exact.
    """
    gx, gy = grid.axes()
    cs = grid.cell
    lam = cfg.energy_weight
    cut = cfg.e_violation

    E = _eval_lattice(fld, gx, gy)
    blocked = E >= cfg.e_block
    if len(extra_blocked):
        blocked = blocked.copy()
        blocked.flat[np.asarray(list(extra_blocked), dtype=np.int64)] = True

    half = cs / 2.0
    ds_d = cs * math.sqrt(2.0)

    w_e = np.full((grid.ny, grid.nx), np.inf)
    w_n = np.full((grid.ny, grid.nx), np.inf)
    w_ne = np.full((grid.ny, grid.nx), np.inf)
    w_nw = np.full((grid.ny, grid.nx), np.inf)

    def edge_weight(midpoint_t: np.ndarray, ds: float) -> np.ndarray:
        # A midpoint at or above the cutoff keeps its edge impassable at
        # every energy_weight, including zero: validation would reject the
        # move anyway.
        diverged = ~np.isfinite(midpoint_t)
        w = ds * (1.0 + lam * np.where(diverged, 0.0, midpoint_t))
        w[diverged] = np.inf
        return w

    me = _transform_arr(_eval_lattice(fld, gx[:-1] + half, gy), cut)  # east-edge midpoints
    w_e[:, :-1] = edge_weight(me, cs)
    w_e[:, :-1][blocked[:, :-1] | blocked[:, 1:]] = np.inf

    mn = _transform_arr(_eval_lattice(fld, gx, gy[:-1] + half), cut)  # north-edge midpoints
    w_n[:-1, :] = edge_weight(mn, cs)
    w_n[:-1, :][blocked[:-1, :] | blocked[1:, :]] = np.inf

    md = _transform_arr(_eval_lattice(fld, gx[:-1] + half, gy[:-1] + half), cut)
    diag = edge_weight(md, ds_d)  # cell-square centers
    w_ne[:-1, :-1] = diag
    w_ne[:-1, :-1][blocked[:-1, :-1] | blocked[1:, 1:]] = np.inf
    w_nw[:-1, 1:] = diag
    w_nw[:-1, 1:][blocked[:-1, 1:] | blocked[1:, :-1]] = np.inf

    return w_e, w_n, w_ne, w_nw, E


def _heuristic(grid: _Grid, goal_idx: int) -> np.ndarray:
    gx, gy = grid.axes()
    g = grid.coords(goal_idx)
    X, Y = np.meshgrid(gx - g.x, gy - g.y)
    return np.hypot(X, Y) * _H_DEFLATE


def plan_route(
    fld: CompositeField,
    start: Vec2,
    goal: Vec2,
    cfg: Optional[PlannerConfig] = None,
    extra_blocked: Sequence[int] = (),
) -> Route:
    """Grid-optimal low-energy route from start to goal.

    Waypoints are the raw grid polyline with the exact start and goal at the
    ends. Ties between equal-cost frontier entries break toward the lower
    cell index, so results are reproducible across backends.
    """
    cfg = cfg or PlannerConfig()
    if start == goal:
        raise DegenerateRequest("start and goal coincide")
    grid = _Grid.around(start, goal, cfg)
    s_idx = grid.snap(start)
    g_idx = grid.snap(goal)
    if s_idx == g_idx:
        raise DegenerateRequest("start and goal share a grid cell; nothing to plan")
    w_e, w_n, w_ne, w_nw, E = _grid_weights(fld, grid, cfg, extra_blocked)
    blocked_flat = (E.ravel() >= cfg.e_block)
    if len(extra_blocked):
        blocked_flat = blocked_flat.copy()
        blocked_flat[np.asarray(list(extra_blocked), dtype=np.int64)] = True
    if blocked_flat[s_idx]:
        raise OutOfBounds("start lies in a blocked cell")
    if blocked_flat[g_idx]:
        raise OutOfBounds("goal lies in a blocked cell")
    h = _heuristic(grid, g_idx)
    path, cost = kernels.plan_grid(w_e, w_n, w_ne, w_nw, h, s_idx, g_idx)
    if path.shape[0] == 0 or not math.isfinite(cost):
        raise NoRoute("goal is unreachable below the blocking threshold")
    pts = [grid.coords(i) for i in path]
    if pts[0] != start:
        pts.insert(0, start)
    if pts[-1] != goal:
        pts.append(goal)
    return Route(tuple(pts))


def plan_route_geo(
    store,
    start: tuple[float, float],
    goal: tuple[float, float],
    collections: Optional[Sequence[str]] = None,
    t: Optional[datetime] = None,
    cfg: Optional[PlannerConfig] = None,
    max_refinements: int = 8,
) -> tuple[list[tuple[float, float]], ComplianceReport]:
    """Plan between (lat, lon) endpoints and return a validated route.

    The planned polyline is re-scored with validate_route — the same check a
    caller would run — and if a midpoint slipped past the planner's cell
    sampling, the offending cell is blocked and planning repeats. The
    returned route therefore always re-validates Compliant at the same store
    and time.
    """
    cfg = cfg or PlannerConfig()
    _check_latlon([start, goal], "endpoint")
    t = t or store.now()
    s_lat, s_lon = float(start[0]), float(start[1])
    g_lat, g_lon = float(goal[0]), float(goal[1])

    proj = LocalProjection(lat0=0.5 * (s_lat + g_lat), lon0=0.5 * (s_lon + g_lon))
    s = proj.to_local(s_lon, s_lat)
    g = proj.to_local(g_lon, g_lat)
    if s == g:
        raise DegenerateRequest("start and goal coincide")
    grid = _Grid.around(s, g, cfg)
    lo, hi = grid.bbox()
    lo_lon, lo_lat = proj.to_lonlat(lo)
    hi_lon, hi_lat = proj.to_lonlat(hi)
    region = GeoBBox(
        min_lon=max(lo_lon, -180.0),
        min_lat=max(lo_lat, -90.0),
        max_lon=min(hi_lon, 180.0),
        max_lat=min(hi_lat, 90.0),
    )
    fld = store.effective_field(region, collections, t)

    blocked: set[int] = set()
    for _ in range(max_refinements + 1):
        route = plan_route(fld, s, g, cfg, extra_blocked=sorted(blocked))
        latlon = []
        for p in route.waypoints:
            lon, lat = proj.to_lonlat(p)
            # endpoints a hair off a cell center can collapse onto it at
            # lat/lon resolution; keep the polyline strictly deduplicated
            if not latlon or latlon[-1] != (lat, lon):
                latlon.append((lat, lon))
        if len(latlon) < 2:
            raise DegenerateRequest("start and goal coincide at coordinate resolution")
        report = validate_route(store, latlon, collections, t, cfg)
        if report.verdict == COMPLIANT:
            return latlon, report
        peak_lat, peak_lon = report.peak_latlon
        cell = grid.snap(proj.to_local(peak_lon, peak_lat))
        if cell in blocked:  # no progress to make
            break
        blocked.add(cell)
    raise NoRoute("no compliant route within the refinement budget")
