"""Spatial index behavior: CRUD, radius queries vs. the linear-scan oracle,
activation windows, effective-field assembly, temporaries, snapshots."""

import json
import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from fieldspace.field import eval_composite
from fieldspace.geo import GeoBBox, LocalProjection, R_EARTH
from fieldspace.rgeojson import Matrix2, parse_document
from fieldspace.store import (
    DuplicateId,
    IoError,
    SpatialIndex,
    TtlRange,
    UnknownCollection,
    UnknownId,
)
from fieldspace.units import Vec2

T0 = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


class FakeClock:
    def __init__(self, start=T0):
        self.t = start

    def __call__(self):
        return self.t

    def advance(self, seconds):
        self.t += timedelta(seconds=seconds)


def point_doc(lon, lat, *, a=2500.0, doc_id=None, collection="default", windows=None):
    obj = {
        "type": "Point",
        "coordinates": [lon, lat],
        "repulsion": [[a, 0.0], [0.0, a]],
        "collection": collection,
    }
    if doc_id is not None:
        obj["id"] = doc_id
    if windows is not None:
        obj["active_windows"] = windows
    return parse_document(json.dumps(obj))


def offset_lonlat(lat0, lon0, east_m, north_m):
    proj = LocalProjection(lat0=lat0, lon0=lon0)
    return proj.to_lonlat(Vec2(east_m, north_m))


class TestBasics:
    def test_insert_get_len_collections(self):
        idx = SpatialIndex()
        d = point_doc(-122.4, 37.77, doc_id="a", collection="city")
        assert idx.insert(d) == "a"
        assert len(idx) == 1
        assert idx.get("a") == d
        assert idx.collections() == ["city"]

    def test_duplicate_id_rejected(self):
        idx = SpatialIndex()
        idx.insert(point_doc(0, 0, doc_id="a"))
        with pytest.raises(DuplicateId):
            idx.insert(point_doc(1, 1, doc_id="a"))

    def test_remove_returns_document_then_unknown(self):
        idx = SpatialIndex()
        d = point_doc(0, 0, doc_id="a")
        idx.insert(d)
        assert idx.remove("a") == d
        assert len(idx) == 0
        with pytest.raises(UnknownId):
            idx.remove("a")
        with pytest.raises(UnknownId):
            idx.get("a")

    def test_register_collection_makes_empty_collection_queryable(self):
        idx = SpatialIndex()
        with pytest.raises(UnknownCollection):
            idx.query_radius((0.0, 0.0), 1000.0, ["maritime"])
        idx.register_collection("maritime")
        assert idx.query_radius((0.0, 0.0), 1000.0, ["maritime"]) == []
        assert idx.collections() == ["maritime"]

    def test_unknown_collection_named_in_error(self):
        idx = SpatialIndex()
        idx.insert(point_doc(0, 0, collection="city"))
        with pytest.raises(UnknownCollection, match="nope"):
            idx.query_radius((0.0, 0.0), 1000.0, ["city", "nope"])

    def test_empty_collection_list_rejected(self):
        idx = SpatialIndex()
        with pytest.raises(ValueError):
            idx.query_radius((0.0, 0.0), 1000.0, [])

    def test_nonpositive_radius_rejected(self):
        idx = SpatialIndex()
        idx.register_collection("c")
        with pytest.raises(ValueError):
            idx.query_radius((0.0, 0.0), 0.0, ["c"])

    def test_constructor_knob_validation(self):
        with pytest.raises(ValueError):
            SpatialIndex(reach_k=0.0)
        with pytest.raises(ValueError):
            SpatialIndex(r_sep=-1.0)
        with pytest.raises(ValueError):
            SpatialIndex(max_ttl=0.0)


def seeded_store(seed, n_docs, lat0=37.0, lon0=-122.0, spread_deg=2.0):
    rng = np.random.default_rng(seed)
    idx = SpatialIndex(clock=FakeClock())
    for i in range(n_docs):
        lon = lon0 + rng.uniform(-spread_deg, spread_deg)
        lat = lat0 + rng.uniform(-spread_deg, spread_deg)
        a = rng.uniform(100.0, 1_000_000.0)
        coll = rng.choice(["alpha", "beta", "gamma"])
        idx.insert(point_doc(lon, lat, a=a, doc_id=f"d{i:04d}", collection=str(coll)))
    return idx, rng


class TestRadiusQueries:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_bucketed_query_matches_linear_scan(self, seed):
        idx, rng = seeded_store(seed, 120)
        for _ in range(40):
            lat = 37.0 + rng.uniform(-2.5, 2.5)
            lon = -122.0 + rng.uniform(-2.5, 2.5)
            radius = rng.uniform(50.0, 300_000.0)
            colls = ["alpha", "beta", "gamma"][: rng.integers(1, 4)]
            fast = idx.query_radius((lat, lon), radius, colls)
            slow = idx.scan_radius((lat, lon), radius, colls)
            assert [d.id for d in fast] == [d.id for d in slow]

    def test_far_document_not_returned(self):
        idx = SpatialIndex()
        lon, lat = offset_lonlat(37.0, -122.0, 10_000.0, 0.0)
        idx.insert(point_doc(lon, lat, a=100.0, doc_id="far", collection="c"))
        assert idx.query_radius((37.0, -122.0), 1_000.0, ["c"]) == []

    def test_energized_documents_always_returned(self):
        # Any document whose field exceeds e^-9 somewhere in the disc must
        # be in the result set (the index may return more, never fewer).
        rng = np.random.default_rng(7)
        idx = SpatialIndex()
        placed = []
        for i in range(80):
            a = rng.uniform(100.0, 250_000.0)
            east = rng.uniform(-30_000.0, 30_000.0)
            north = rng.uniform(-30_000.0, 30_000.0)
            lon, lat = offset_lonlat(37.0, -122.0, east, north)
            idx.insert(point_doc(lon, lat, a=a, doc_id=f"d{i}", collection="c"))
            placed.append((f"d{i}", east, north, a))
        radius = 5_000.0
        got = {d.id for d in idx.query_radius((37.0, -122.0), radius, ["c"])}
        for doc_id, east, north, a in placed:
            dist = max(0.0, math.hypot(east, north) - radius)
            if math.exp(-(dist * dist) / a) > math.exp(-9.0) * (1 + 1e-9):
                assert doc_id in got

    def test_high_latitude_equivalence(self):
        idx, rng = seeded_store(11, 60, lat0=60.0, lon0=10.0)
        for _ in range(20):
            lat = 60.0 + rng.uniform(-2.5, 2.5)
            lon = 10.0 + rng.uniform(-2.5, 2.5)
            radius = rng.uniform(100.0, 200_000.0)
            fast = idx.query_radius((lat, lon), radius, ["alpha", "beta", "gamma"])
            slow = idx.scan_radius((lat, lon), radius, ["alpha", "beta", "gamma"])
            assert [d.id for d in fast] == [d.id for d in slow]

    def test_results_sorted_by_id(self):
        idx = SpatialIndex()
        for doc_id in ["zeta", "alpha", "mid"]:
            idx.insert(point_doc(-122.0, 37.0, doc_id=doc_id, collection="c"))
        ids = [d.id for d in idx.query_radius((37.0, -122.0), 1000.0, ["c"])]
        assert ids == ["alpha", "mid", "zeta"]


class TestActivationFiltering:
    WINDOW = [{"start": "2026-03-01T00:00:00Z", "end": "2026-03-31T23:59:59Z"}]

    def test_absolute_window(self):
        idx = SpatialIndex()
        idx.insert(point_doc(-122.0, 37.0, doc_id="w", collection="c", windows=self.WINDOW))
        inside = datetime(2026, 3, 15, tzinfo=timezone.utc)
        before = datetime(2026, 2, 15, tzinfo=timezone.utc)
        after = datetime(2026, 4, 1, tzinfo=timezone.utc)
        assert [d.id for d in idx.query_radius((37.0, -122.0), 1000.0, ["c"], t=inside)] == ["w"]
        assert idx.query_radius((37.0, -122.0), 1000.0, ["c"], t=before) == []
        assert idx.query_radius((37.0, -122.0), 1000.0, ["c"], t=after) == []

    def test_window_endpoints_inclusive(self):
        idx = SpatialIndex()
        idx.insert(point_doc(-122.0, 37.0, doc_id="w", collection="c", windows=self.WINDOW))
        start = datetime(2026, 3, 1, 0, 0, 0, tzinfo=timezone.utc)
        end = datetime(2026, 3, 31, 23, 59, 59, tzinfo=timezone.utc)
        for t in (start, end):
            assert [d.id for d in idx.query_radius((37.0, -122.0), 1000.0, ["c"], t=t)] == ["w"]

    def test_daily_window_with_midnight_wrap(self):
        windows = [{"daily_from": "22:00", "daily_to": "02:00"}]
        idx = SpatialIndex()
        idx.insert(point_doc(-122.0, 37.0, doc_id="n", collection="c", windows=windows))

        def active(hour, minute=0):
            t = datetime(2026, 3, 1, hour, minute, tzinfo=timezone.utc)
            return bool(idx.query_radius((37.0, -122.0), 1000.0, ["c"], t=t))

        assert active(23)
        assert active(1)
        assert active(22)  # start inclusive
        assert not active(2)  # end exclusive
        assert not active(12)

    def test_utc_offset_shifts_daily_windows(self):
        windows = [{"daily_from": "09:00", "daily_to": "17:00"}]
        local = SpatialIndex(utc_offset=5 * 3600.0)
        local.insert(point_doc(-122.0, 37.0, doc_id="d", collection="c", windows=windows))
        t = datetime(2026, 3, 1, 5, 0, tzinfo=timezone.utc)  # 10:00 local
        assert [d.id for d in local.query_radius((37.0, -122.0), 1000.0, ["c"], t=t)] == ["d"]
        utc = SpatialIndex()
        utc.insert(point_doc(-122.0, 37.0, doc_id="d", collection="c", windows=windows))
        assert utc.query_radius((37.0, -122.0), 1000.0, ["c"], t=t) == []

    def test_default_time_comes_from_injected_clock(self):
        clock = FakeClock(datetime(2026, 3, 1, 23, 0, tzinfo=timezone.utc))
        windows = [{"daily_from": "22:00", "daily_to": "02:00"}]
        idx = SpatialIndex(clock=clock)
        idx.insert(point_doc(-122.0, 37.0, doc_id="n", collection="c", windows=windows))
        assert len(idx.query_radius((37.0, -122.0), 1000.0, ["c"])) == 1
        clock.advance(6 * 3600)  # 05:00, outside the window
        assert idx.query_radius((37.0, -122.0), 1000.0, ["c"]) == []


def region_around(lat, lon, half_m):
    proj = LocalProjection(lat0=lat, lon0=lon)
    lon1, lat1 = proj.to_lonlat(Vec2(-half_m, -half_m))
    lon2, lat2 = proj.to_lonlat(Vec2(half_m, half_m))
    return GeoBBox(lon1, lat1, lon2, lat2)


class TestEffectiveField:
    def test_deterministic_and_id_ordered(self):
        idx, _ = seeded_store(3, 40)
        region = region_around(37.0, -122.0, 100_000.0)
        f1 = idx.effective_field(region)
        f2 = idx.effective_field(region)
        assert f1.units == f2.units
        assert len(f1.units) > 0

    def test_region_filtering(self):
        idx = SpatialIndex()
        idx.insert(point_doc(-122.0, 37.0, a=2500.0, doc_id="near", collection="c"))
        far_lon, far_lat = offset_lonlat(37.0, -122.0, 500_000.0, 0.0)
        idx.insert(point_doc(far_lon, far_lat, a=2500.0, doc_id="far", collection="c"))
        field = idx.effective_field(region_around(37.0, -122.0, 5_000.0))
        assert len(field.units) == 1

    def test_energy_matches_hand_built_unit(self):
        idx = SpatialIndex()
        idx.insert(point_doc(-122.0, 37.0, a=2500.0, doc_id="p", collection="c"))
        region = region_around(37.0, -122.0, 2_000.0)
        field = idx.effective_field(region)
        proj = region.projection()
        center = proj.to_local(-122.0, 37.0)
        probe = Vec2(center.x + 50.0, center.y)
        assert eval_composite(field, probe) == pytest.approx(math.exp(-1.0), rel=1e-9)

    def test_inactive_documents_excluded(self):
        idx = SpatialIndex()
        idx.insert(
            point_doc(
                -122.0,
                37.0,
                doc_id="w",
                collection="c",
                windows=[{"start": "2026-06-01T00:00:00Z"}],
            )
        )
        region = region_around(37.0, -122.0, 5_000.0)
        t_off = datetime(2026, 3, 1, tzinfo=timezone.utc)
        t_on = datetime(2026, 7, 1, tzinfo=timezone.utc)
        assert idx.effective_field(region, t=t_off).units == ()
        assert len(idx.effective_field(region, t=t_on).units) == 1

    def test_collection_scoping(self):
        idx = SpatialIndex()
        idx.insert(point_doc(-122.0, 37.0, doc_id="a", collection="alpha"))
        idx.insert(point_doc(-122.0, 37.0001, doc_id="b", collection="beta"))
        region = region_around(37.0, -122.0, 5_000.0)
        assert len(idx.effective_field(region).units) == 2
        assert len(idx.effective_field(region, collections=["alpha"]).units) == 1
        with pytest.raises(UnknownCollection):
            idx.effective_field(region, collections=["gamma"])


class TestTemporaries:
    def test_stationary_client_is_circular(self):
        idx = SpatialIndex(clock=FakeClock())
        temp = idx.upsert_temporary("cli-1", (37.0, -122.0), (0.0, 0.0), 0.0, 30.0)
        assert temp.semi_axes == (150.0, 150.0)

    def test_moving_client_elongates_along_heading(self):
        idx = SpatialIndex(clock=FakeClock())
        temp = idx.upsert_temporary("cli-1", (37.0, -122.0), (1.0, 0.0), 10.0, 30.0)
        assert temp.semi_axes == (150.0 + 10.0 * 30.0, 150.0)

    def test_energy_is_one_inside_forward_lobe(self):
        idx = SpatialIndex(clock=FakeClock())
        idx.register_collection("c")
        idx.upsert_temporary("cli-1", (37.0, -122.0), (1.0, 0.0), 10.0, 30.0)
        region = region_around(37.0, -122.0, 2_000.0)
        field = idx.effective_field(region)
        assert len(field.units) == 1
        proj = region.projection()
        center = proj.to_local(-122.0, 37.0)
        forward = Vec2(center.x + 300.0, center.y)
        assert eval_composite(field, forward) == 1.0
        past_lobe = Vec2(center.x + 460.0, center.y)
        assert eval_composite(field, past_lobe) < 1.0
        across = Vec2(center.x, center.y + 160.0)
        assert eval_composite(field, across) < 1.0

    def test_upsert_replaces_previous_unit(self):
        idx = SpatialIndex(clock=FakeClock())
        idx.upsert_temporary("cli-1", (37.0, -122.0), (1.0, 0.0), 10.0, 30.0)
        idx.upsert_temporary("cli-1", (37.0, -122.0), (0.0, 1.0), 5.0, 20.0)
        temps = idx.temporaries()
        assert len(temps) == 1
        assert temps[0].semi_axes == (150.0 + 5.0 * 20.0, 150.0)
        assert (temps[0].heading_east, temps[0].heading_north) == (0.0, 1.0)

    def test_expiry_via_clock(self):
        clock = FakeClock()
        idx = SpatialIndex(clock=clock)
        idx.register_collection("c")
        idx.upsert_temporary("cli-1", (37.0, -122.0), (1.0, 0.0), 0.0, 30.0)
        region = region_around(37.0, -122.0, 2_000.0)
        assert len(idx.effective_field(region).units) == 1
        clock.advance(31.0)
        assert idx.effective_field(region).units == ()
        assert idx.temporaries() == []

    def test_ttl_range_enforced(self):
        idx = SpatialIndex(clock=FakeClock(), max_ttl=60.0)
        for ttl in (0.0, -5.0, 60.1):
            with pytest.raises(TtlRange):
                idx.upsert_temporary("c", (37.0, -122.0), (1.0, 0.0), 1.0, ttl)
        idx.upsert_temporary("c", (37.0, -122.0), (1.0, 0.0), 1.0, 60.0)  # boundary ok

    def test_moving_client_needs_heading(self):
        idx = SpatialIndex(clock=FakeClock())
        with pytest.raises(ValueError):
            idx.upsert_temporary("c", (37.0, -122.0), (0.0, 0.0), 5.0, 30.0)

    def test_heading_normalized(self):
        idx = SpatialIndex(clock=FakeClock())
        temp = idx.upsert_temporary("c", (37.0, -122.0), (3.0, 4.0), 10.0, 30.0)
        assert temp.heading_east == pytest.approx(0.6)
        assert temp.heading_north == pytest.approx(0.8)

    def test_temporaries_near_filters_by_distance(self):
        idx = SpatialIndex(clock=FakeClock())
        idx.upsert_temporary("near", (37.0, -122.0), (1.0, 0.0), 0.0, 30.0)
        far_lon, far_lat = offset_lonlat(37.0, -122.0, 100_000.0, 0.0)
        idx.upsert_temporary("far", (far_lat, far_lon), (1.0, 0.0), 0.0, 30.0)
        names = [u.client for u in idx.temporaries_near((37.0, -122.0), 5_000.0)]
        assert names == ["near"]


class TestSnapshots:
    def test_round_trip_preserves_documents_and_queries(self, tmp_path):
        idx, rng = seeded_store(5, 50)
        idx.register_collection("empty-coll")
        idx.save_snapshot(tmp_path / "snap")
        loaded = SpatialIndex.load_snapshot(tmp_path / "snap", clock=FakeClock())
        assert len(loaded) == len(idx)
        assert loaded.collections() == idx.collections()
        for doc_id in [f"d{i:04d}" for i in range(50)]:
            assert loaded.get(doc_id) == idx.get(doc_id)
        for _ in range(10):
            lat = 37.0 + rng.uniform(-2, 2)
            lon = -122.0 + rng.uniform(-2, 2)
            r = rng.uniform(1000.0, 200_000.0)
            a = idx.query_radius((lat, lon), r, ["alpha", "beta", "gamma"])
            b = loaded.query_radius((lat, lon), r, ["alpha", "beta", "gamma"])
            assert [d.id for d in a] == [d.id for d in b]

    def test_temporaries_not_saved(self, tmp_path):
        idx = SpatialIndex(clock=FakeClock())
        idx.insert(point_doc(-122.0, 37.0, doc_id="p", collection="c"))
        idx.upsert_temporary("cli", (37.0, -122.0), (1.0, 0.0), 5.0, 30.0)
        idx.save_snapshot(tmp_path / "snap")
        loaded = SpatialIndex.load_snapshot(tmp_path / "snap", clock=FakeClock())
        assert loaded.temporaries() == []
        assert len(loaded) == 1

    def test_corrupt_manifest_names_path(self, tmp_path):
        snap = tmp_path / "snap"
        snap.mkdir()
        (snap / "manifest.json").write_text("{not json", encoding="utf-8")
        with pytest.raises(IoError, match="manifest.json"):
            SpatialIndex.load_snapshot(snap)

    def test_missing_manifest_names_path(self, tmp_path):
        with pytest.raises(IoError, match="manifest.json"):
            SpatialIndex.load_snapshot(tmp_path / "nowhere")

    def test_corrupt_document_names_file(self, tmp_path):
        idx = SpatialIndex()
        idx.insert(point_doc(-122.0, 37.0, doc_id="p", collection="c"))
        snap = tmp_path / "snap"
        idx.save_snapshot(snap)
        manifest = json.loads((snap / "manifest.json").read_text())
        victim = manifest["documents"][0]["file"]
        (snap / victim).write_text('{"type": "Nope"}', encoding="utf-8")
        with pytest.raises(IoError, match=victim):
            SpatialIndex.load_snapshot(snap)

    def test_manifest_id_mismatch_rejected(self, tmp_path):
        idx = SpatialIndex()
        idx.insert(point_doc(-122.0, 37.0, doc_id="p", collection="c"))
        snap = tmp_path / "snap"
        idx.save_snapshot(snap)
        manifest = json.loads((snap / "manifest.json").read_text())
        manifest["documents"][0]["id"] = "other"
        (snap / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
        with pytest.raises(IoError, match="id does not match"):
            SpatialIndex.load_snapshot(snap)

    def test_save_is_deterministic(self, tmp_path):
        idx, _ = seeded_store(9, 20)
        idx.save_snapshot(tmp_path / "a")
        idx.save_snapshot(tmp_path / "b")
        for name in sorted(p.name for p in (tmp_path / "a").iterdir()):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
