"""Spatial store: indexed restriction documents and temporary client units.

Documents are indexed by an inflated geographic bounding box: the box of the
geometry's raw positions grown by the repulsion reach (k length scales, with
energy at most exp(-k^2) beyond it) plus the ellipse extent where relevant.
Queries are answered from one-degree grid buckets and then filtered by an
exact box-versus-disc predicate evaluated in the query's local projection;
the bucket stage is a pure superset optimization, so results match a linear
scan over the same predicate exactly.

Concurrency: a single lock guards mutation and snapshotting of the internal
tables; readers capture immutable tuples under the lock and evaluate outside
it, so in-flight evaluations never observe partial updates.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .geo import GeoBBox, LocalProjection, R_EARTH
from .rgeojson import (
    RestrictionDocument,
    compile_units,
    document_to_obj,
    iter_positions,
    parse_document,
    reach_margin,
    serialize_document,
    windows_active,
)
from .units import CompositeField, EllipseUnit, Matrix2, Vec2

__all__ = [
    "StoreError",
    "DuplicateId",
    "UnknownId",
    "UnknownCollection",
    "TtlRange",
    "IoError",
    "TemporaryUnit",
    "SpatialIndex",
    "DEFAULT_REACH_K",
    "DEFAULT_SEPARATION_M",
    "DEFAULT_MAX_TTL_S",
]

# Reach multiplier for index inflation: energy <= e^-9 beyond 3 length scales.
DEFAULT_REACH_K = 3.0

# Separation radius around a client, and the ttl ceiling for its temporary unit.
DEFAULT_SEPARATION_M = 150.0
DEFAULT_MAX_TTL_S = 60.0

_DEG = 180.0 / math.pi

# Bucket grid cell size in degrees.
_CELL_DEG = 1.0

# Documents whose inflated box spans more cells than this skip the grid and
# join every candidate set instead.
_MAX_BUCKETS_PER_DOC = 4096


class StoreError(Exception):
    """Base class for store errors."""


class DuplicateId(StoreError):
    pass


class UnknownId(StoreError):
    pass


class UnknownCollection(StoreError):
    pass


class TtlRange(StoreError):
    pass


class IoError(StoreError):
    """Snapshot read/write failure; the message names the offending path."""


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _margin_degrees(margin_m: float, lat_lo: float, lat_hi: float) -> tuple[float, float]:
    """Convert a meter margin to (dlon, dlat) degrees, conservatively.

    The longitude margin uses the smallest cosine over the latitude band the
    inflated box can reach; near the poles it degrades to the full circle.
    """
    dlat = margin_m / R_EARTH * _DEG
    worst = min(89.9, max(abs(lat_lo), abs(lat_hi)) + dlat)
    dlon = margin_m / (R_EARTH * math.cos(math.radians(worst))) * _DEG
    if worst >= 89.9:
        dlon = 360.0
    return dlon, dlat


@dataclass(frozen=True)
class TemporaryUnit:
    """A short-lived separation field around a moving client.

    Stored as a recipe (position, heading, speed) rather than a baked unit
    because units live in a query-local projection; ``to_unit`` materializes
    the forward-elongated ellipse for a given projection.
    """

    client: str
    lat: float
    lon: float
    heading_east: float
    heading_north: float
    speed: float
    ttl: float
    expires_at: datetime
    r_sep: float

    @property
    def semi_axes(self) -> tuple[float, float]:
        """(major along heading, minor across) in meters."""
        return (self.r_sep + self.speed * self.ttl, self.r_sep)

    def to_unit(self, proj: LocalProjection) -> EllipseUnit:
        major, minor = self.semi_axes
        hx, hy = self.heading_east, self.heading_north
        d = major - minor
        shape = Matrix2(minor + d * hx * hx, d * hx * hy, d * hx * hy, minor + d * hy * hy)
        repulsion = Matrix2.diagonal(self.r_sep**2, self.r_sep**2)
        return EllipseUnit(proj.to_local(self.lon, self.lat), shape, repulsion)

    def bbox_degrees(self, reach_k: float) -> tuple[float, float, float, float]:
        major, _ = self.semi_axes
        margin_m = major + reach_k * self.r_sep
        dlon, dlat = _margin_degrees(margin_m, self.lat, self.lat)
        return (self.lon - dlon, self.lat - dlat, self.lon + dlon, self.lat + dlat)


class SpatialIndex:
    """In-memory document store with spatial, temporal, and collection filters."""

    def __init__(
        self,
        reach_k: float = DEFAULT_REACH_K,
        r_sep: float = DEFAULT_SEPARATION_M,
        max_ttl: float = DEFAULT_MAX_TTL_S,
        utc_offset: float = 0.0,
        clock: Optional[Callable[[], datetime]] = None,
    ):
        if reach_k <= 0 or r_sep <= 0 or max_ttl <= 0:
            raise ValueError("reach_k, r_sep, and max_ttl must be positive")
        self.reach_k = float(reach_k)
        self.r_sep = float(r_sep)
        self.max_ttl = float(max_ttl)
        self.utc_offset = float(utc_offset)
        self._clock = clock or _utc_now
        self._lock = threading.Lock()
        self._docs: dict[str, RestrictionDocument] = {}
        self._bbox: dict[str, tuple[float, float, float, float]] = {}
        self._collections: dict[str, set[str]] = {}
        self._buckets: dict[tuple[int, int], set[str]] = {}
        self._oversize: set[str] = set()
        self._temporaries: dict[str, TemporaryUnit] = {}

    # -- basics ------------------------------------------------------------

    def now(self) -> datetime:
        return self._clock()

    def __len__(self) -> int:
        return len(self._docs)

    def get(self, doc_id: str) -> RestrictionDocument:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise UnknownId(f"no document with id {doc_id!r}") from None

    def collections(self) -> list[str]:
        return sorted(self._collections)

    def register_collection(self, name: str) -> None:
        """Make a collection queryable even while it holds no documents."""
        if not name:
            raise ValueError("collection name must be non-empty")
        with self._lock:
            self._collections.setdefault(name, set())

    # -- index maintenance ---------------------------------------------------

    def _inflated_bbox(self, doc: RestrictionDocument) -> tuple[float, float, float, float]:
        pts = list(iter_positions(doc.geometry))
        lons = [p.x for p in pts]
        lats = [p.y for p in pts]
        margin_m = reach_margin(doc.geometry, self.reach_k)
        dlon, dlat = _margin_degrees(margin_m, min(lats), max(lats))
        return (min(lons) - dlon, min(lats) - dlat, max(lons) + dlon, max(lats) + dlat)

    @staticmethod
    def _cells(bbox: tuple[float, float, float, float]) -> Iterable[tuple[int, int]]:
        x0 = math.floor(bbox[0] / _CELL_DEG)
        y0 = math.floor(bbox[1] / _CELL_DEG)
        x1 = math.floor(bbox[2] / _CELL_DEG)
        y1 = math.floor(bbox[3] / _CELL_DEG)
        for cx in range(x0, x1 + 1):
            for cy in range(y0, y1 + 1):
                yield (cx, cy)

    def insert(self, doc: RestrictionDocument) -> str:
        bbox = self._inflated_bbox(doc)
        with self._lock:
            if doc.id in self._docs:
                raise DuplicateId(f"document {doc.id!r} already stored")
            self._docs[doc.id] = doc
            self._bbox[doc.id] = bbox
            self._collections.setdefault(doc.collection, set()).add(doc.id)
            n_cells = (
                (math.floor(bbox[2]) - math.floor(bbox[0]) + 1)
                * (math.floor(bbox[3]) - math.floor(bbox[1]) + 1)
            )
            if n_cells > _MAX_BUCKETS_PER_DOC:
                self._oversize.add(doc.id)
            else:
                for cell in self._cells(bbox):
                    self._buckets.setdefault(cell, set()).add(doc.id)
        return doc.id

    def remove(self, doc_id: str) -> RestrictionDocument:
        with self._lock:
            doc = self._docs.pop(doc_id, None)
            if doc is None:
                raise UnknownId(f"no document with id {doc_id!r}")
            bbox = self._bbox.pop(doc_id)
            self._collections[doc.collection].discard(doc_id)
            if doc_id in self._oversize:
                self._oversize.discard(doc_id)
            else:
                for cell in self._cells(bbox):
                    members = self._buckets.get(cell)
                    if members is not None:
                        members.discard(doc_id)
                        if not members:
                            del self._buckets[cell]
        return doc

    # -- queries -------------------------------------------------------------

    def _require_collections(self, collections: Optional[Sequence[str]]) -> frozenset:
        if collections is None:
            return frozenset(self._collections)
        names = list(collections)
        if not names:
            raise ValueError("collections must be non-empty")
        missing = [n for n in names if n not in self._collections]
        if missing:
            raise UnknownCollection(f"unknown collection(s): {', '.join(sorted(missing))}")
        return frozenset(names)

    @staticmethod
    def _bbox_hits_disc(
        bbox: tuple[float, float, float, float], proj: LocalProjection, radius: float
    ) -> bool:
        lo = proj.to_local(bbox[0], bbox[1])
        hi = proj.to_local(bbox[2], bbox[3])
        nx = min(max(0.0, lo.x), hi.x)
        ny = min(max(0.0, lo.y), hi.y)
        return nx * nx + ny * ny <= radius * radius

    def _candidates_for_bbox(self, bbox: tuple[float, float, float, float]) -> set[str]:
        with self._lock:
            out = set(self._oversize)
            for cell in self._cells(bbox):
                out.update(self._buckets.get(cell, ()))
        return out

    def query_radius(
        self,
        center: tuple[float, float],
        radius: float,
        collections: Sequence[str],
        t: Optional[datetime] = None,
    ) -> list[RestrictionDocument]:
        """Documents relevant to a disc: in a named collection, active at t,
        inflated box meeting the disc. A superset of every document whose
        energy anywhere in the disc exceeds e^-9."""
        lat, lon = center
        if not radius > 0:
            raise ValueError(f"radius must be positive, got {radius!r}")
        t = t or self._clock()
        names = self._require_collections(collections)
        proj = LocalProjection(lat0=lat, lon0=lon)
        dlon, dlat = _margin_degrees(radius, lat, lat)
        ids = self._candidates_for_bbox((lon - dlon, lat - dlat, lon + dlon, lat + dlat))
        out = []
        for doc_id in sorted(ids):
            doc = self._docs.get(doc_id)
            bbox = self._bbox.get(doc_id)
            if doc is None or bbox is None or doc.collection not in names:
                continue
            if not windows_active(doc.active_windows, t, self.utc_offset):
                continue
            if self._bbox_hits_disc(bbox, proj, radius):
                out.append(doc)
        return out

    def scan_radius(
        self,
        center: tuple[float, float],
        radius: float,
        collections: Sequence[str],
        t: Optional[datetime] = None,
    ) -> list[RestrictionDocument]:
        """Bucket-free linear scan with the same predicate; the test oracle
        for query_radius and a correctness fallback."""
        lat, lon = center
        if not radius > 0:
            raise ValueError(f"radius must be positive, got {radius!r}")
        t = t or self._clock()
        names = self._require_collections(collections)
        proj = LocalProjection(lat0=lat, lon0=lon)
        out = []
        for doc_id in sorted(self._docs):
            doc = self._docs[doc_id]
            if doc.collection not in names:
                continue
            if not windows_active(doc.active_windows, t, self.utc_offset):
                continue
            if self._bbox_hits_disc(self._bbox[doc_id], proj, radius):
                out.append(doc)
        return out

    # -- field assembly ------------------------------------------------------

    @staticmethod
    def projection_for(region: GeoBBox) -> LocalProjection:
        return region.projection()

    @staticmethod
    def _boxes_meet(a, b) -> bool:
        return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])

    def effective_field(
        self,
        region: GeoBBox,
        collections: Optional[Sequence[str]] = None,
        t: Optional[datetime] = None,
    ) -> CompositeField:
        """All active documents plus unexpired temporaries near the region,
        compiled in id-sorted order into the region's local projection."""
        t = t or self._clock()
        names = self._require_collections(collections)
        proj = self.projection_for(region)
        region_box = (region.min_lon, region.min_lat, region.max_lon, region.max_lat)
        ids = self._candidates_for_bbox(region_box)
        with self._lock:
            self._purge_expired(t)
            temps = tuple(sorted(self._temporaries.values(), key=lambda u: u.client))
        units = []
        for doc_id in sorted(ids):
            doc = self._docs.get(doc_id)
            if doc is None or doc.collection not in names:
                continue
            if not windows_active(doc.active_windows, t, self.utc_offset):
                continue
            if self._boxes_meet(self._bbox[doc_id], region_box):
                units.extend(compile_units(doc, proj.to_local))
        for temp in temps:
            if temp.expires_at > t and self._boxes_meet(
                temp.bbox_degrees(self.reach_k), region_box
            ):
                units.append(temp.to_unit(proj))
        return CompositeField(tuple(units))

    # -- temporaries -------------------------------------------------------------

    def _purge_expired(self, t: datetime) -> None:
        dead = [c for c, u in self._temporaries.items() if u.expires_at <= t]
        for c in dead:
            del self._temporaries[c]

    def upsert_temporary(
        self,
        client: str,
        position: tuple[float, float],
        heading: tuple[float, float],
        speed: float,
        ttl: float,
    ) -> TemporaryUnit:
        """Replace the client's separation field: an ellipse elongated along
        the heading with semi-axes (r_sep + speed*ttl, r_sep)."""
        if not client:
            raise ValueError("client id must be non-empty")
        if not (0.0 < ttl <= self.max_ttl):
            raise TtlRange(f"ttl must lie in (0, {self.max_ttl}], got {ttl!r}")
        if not speed >= 0.0:
            raise ValueError(f"speed must be nonnegative, got {speed!r}")
        lat, lon = position
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise ValueError(f"position ({lat}, {lon}) outside lat/lon range")
        hx, hy = float(heading[0]), float(heading[1])
        norm = math.hypot(hx, hy)
        if norm == 0.0:
            if speed > 0.0:
                raise ValueError("heading must be nonzero for a moving client")
            hx, hy = 1.0, 0.0
        else:
            hx, hy = hx / norm, hy / norm
        now = self._clock()
        temp = TemporaryUnit(
            client=client,
            lat=float(lat),
            lon=float(lon),
            heading_east=hx,
            heading_north=hy,
            speed=float(speed),
            ttl=float(ttl),
            expires_at=now + timedelta(seconds=float(ttl)),
            r_sep=self.r_sep,
        )
        with self._lock:
            self._purge_expired(now)
            self._temporaries[client] = temp
        return temp

    def temporaries(self, t: Optional[datetime] = None) -> list[TemporaryUnit]:
        t = t or self._clock()
        with self._lock:
            self._purge_expired(t)
            return sorted(self._temporaries.values(), key=lambda u: u.client)

    def temporaries_near(
        self, center: tuple[float, float], radius: float, t: Optional[datetime] = None
    ) -> list[TemporaryUnit]:
        """Unexpired temporaries whose reach box meets the query disc."""
        lat, lon = center
        if not radius > 0:
            raise ValueError(f"radius must be positive, got {radius!r}")
        proj = LocalProjection(lat0=lat, lon0=lon)
        return [
            u
            for u in self.temporaries(t)
            if self._bbox_hits_disc(u.bbox_degrees(self.reach_k), proj, radius)
        ]

    # -- snapshots ----------------------------------------------------------------

    @staticmethod
    def _snapshot_filename(doc_id: str) -> str:
        stem = re.sub(r"[^A-Za-z0-9._-]", "_", doc_id)[:48]
        tag = hashlib.sha1(doc_id.encode("utf-8")).hexdigest()[:8]
        return f"{stem}-{tag}.rgeojson"

    def save_snapshot(self, path) -> None:
        """One RGeoJSON file per document plus a manifest; temporaries are
        ephemeral and never saved."""
        root = Path(path)
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoError(f"cannot create snapshot directory {root}: {exc}") from None
        with self._lock:
            docs = [self._docs[i] for i in sorted(self._docs)]
            registered = sorted(self._collections)
        records = []
        for doc in docs:
            fname = self._snapshot_filename(doc.id)
            try:
                (root / fname).write_bytes(serialize_document(doc))
            except OSError as exc:
                raise IoError(f"cannot write {root / fname}: {exc}") from None
            obj = document_to_obj(doc)
            records.append(
                {
                    "id": doc.id,
                    "collection": doc.collection,
                    "active_windows": obj.get("active_windows", []),
                    "file": fname,
                }
            )
        manifest = {"collections": registered, "documents": records}
        try:
            (root / "manifest.json").write_text(
                json.dumps(manifest, indent=2, ensure_ascii=False), encoding="utf-8"
            )
        except OSError as exc:
            raise IoError(f"cannot write {root / 'manifest.json'}: {exc}") from None

    @classmethod
    def load_snapshot(cls, path, **kwargs) -> "SpatialIndex":
        """Rebuild a store from a snapshot directory; any unreadable or
        unparseable file aborts the load with that path named."""
        root = Path(path)
        mpath = root / "manifest.json"
        try:
            manifest = json.loads(mpath.read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read {mpath}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise IoError(f"corrupt manifest {mpath}: {exc}") from None
        if not isinstance(manifest, dict) or "documents" not in manifest:
            raise IoError(f"corrupt manifest {mpath}: missing documents")
        docs = []
        for rec in manifest["documents"]:
            fpath = root / rec["file"]
            try:
                doc = parse_document(fpath.read_bytes())
            except OSError as exc:
                raise IoError(f"cannot read {fpath}: {exc}") from None
            except ValueError as exc:
                raise IoError(f"corrupt document {fpath}: {exc}") from None
            if doc.id != rec.get("id"):
                raise IoError(f"corrupt document {fpath}: id does not match manifest")
            docs.append(doc)
        store = cls(**kwargs)
        for name in manifest.get("collections", []):
            store.register_collection(name)
        for doc in docs:
            store.insert(doc)
        return store
