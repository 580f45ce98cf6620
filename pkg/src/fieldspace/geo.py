"""Geographic helpers: local planar projection and timestamp parsing.

Restriction matrices are stated in meters, so geographic queries evaluate in
a local equirectangular frame anchored at the query region's center: east is
+x, north is +y, and one unit is one meter at the anchor latitude. Good to
well under a percent for the tens-of-kilometers extents this engine serves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

from .units import Vec2

__all__ = ["R_EARTH", "LocalProjection", "GeoBBox", "parse_timestamp"]

# Mean Earth radius in meters.
R_EARTH = 6_371_000.0


@dataclass(frozen=True)
class LocalProjection:
    """Equirectangular tangent frame anchored at (lat0, lon0), in meters."""

    lat0: float
    lon0: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat0 <= 90.0):
            raise ValueError(f"anchor latitude out of range: {self.lat0!r}")
        if not (-180.0 <= self.lon0 <= 180.0):
            raise ValueError(f"anchor longitude out of range: {self.lon0!r}")

    @property
    def _kx(self) -> float:
        return R_EARTH * math.cos(math.radians(self.lat0))

    def to_local(self, lon: float, lat: float) -> Vec2:
        return Vec2(
            self._kx * math.radians(lon - self.lon0),
            R_EARTH * math.radians(lat - self.lat0),
        )

    def to_lonlat(self, p: Vec2) -> tuple[float, float]:
        kx = self._kx
        lon = self.lon0 if kx == 0.0 else self.lon0 + math.degrees(p.x / kx)
        return (lon, self.lat0 + math.degrees(p.y / R_EARTH))

    def meters_per_degree(self) -> tuple[float, float]:
        """Scale factors (east per deg lon, north per deg lat) at the anchor."""
        return (math.radians(1.0) * self._kx, math.radians(1.0) * R_EARTH)


@dataclass(frozen=True)
class GeoBBox:
    """Closed lon/lat box; min corner must not exceed max corner."""

    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float

    def __post_init__(self) -> None:
        if not (
            math.isfinite(self.min_lon)
            and math.isfinite(self.min_lat)
            and math.isfinite(self.max_lon)
            and math.isfinite(self.max_lat)
        ):
            raise ValueError("bbox coordinates must be finite")
        if self.min_lon > self.max_lon or self.min_lat > self.max_lat:
            raise ValueError("bbox min corner exceeds max corner")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.min_lon + self.max_lon), 0.5 * (self.min_lat + self.max_lat))

    def projection(self) -> LocalProjection:
        lon, lat = self.center
        return LocalProjection(lat0=lat, lon0=lon)

    def contains(self, lon: float, lat: float) -> bool:
        return self.min_lon <= lon <= self.max_lon and self.min_lat <= lat <= self.max_lat


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 timestamp to an aware UTC datetime.

    Accepts a trailing 'Z' (which datetime.fromisoformat rejects on older
    Pythons) and explicit offsets; naive stamps are taken as UTC.
    """
    if not isinstance(text, str):
        raise ValueError(f"timestamp must be a string, got {type(text).__name__}")
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValueError(f"bad timestamp {text!r}: {exc}") from None
    if stamp.tzinfo is None:
        return stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)
