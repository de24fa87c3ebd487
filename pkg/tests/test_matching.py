import math
from datetime import date

import numpy as np
import pytest

from bustrace.detection import format_time_of_day
from bustrace.geo import GeoPoint, haversine_distance, offset_point
from bustrace.matching import StopMark, match_fixes, sequence_marks
from bustrace.model import BusStop, GpsFix, ItineraryDef, StopType

from conftest import CASE_MARKS

DAY = date(2022, 11, 7)


def _stop(stop_id, lat, lon):
    return BusStop(stop_id=stop_id, name=stop_id, stop_type=StopType.STREET_STOP, lat=lat, lon=lon)


def _fix(lat, lon, t, vehicle="V1"):
    return GpsFix(vehicle_id=vehicle, line_code="L1", lat=lat, lon=lon, day=DAY, time_s=t)


# ── haversine ───────────────────────────────────────────────────────────


def test_haversine_identity():
    p = GeoPoint(-25.4, -49.3)
    assert haversine_distance(p, p) == 0.0


def test_haversine_one_degree_of_equator():
    # Closed-form arc length for one degree along the equator.
    expected = 6_371_000 * math.pi / 180
    got = haversine_distance(GeoPoint(0.0, 0.0), GeoPoint(0.0, 1.0))
    assert got == pytest.approx(expected, abs=1e-3)


def test_haversine_symmetry_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a = GeoPoint(float(rng.uniform(-89, 89)), float(rng.uniform(-179, 179)))
        b = GeoPoint(float(rng.uniform(-89, 89)), float(rng.uniform(-179, 179)))
        assert haversine_distance(a, b) == haversine_distance(b, a)


# ── match_fixes ─────────────────────────────────────────────────────────


def _line(stops):
    return ItineraryDef(
        line_code="L1",
        direction="A",
        stops=tuple((i + 1, s.stop_id) for i, s in enumerate(stops)),
    )


def test_fix_exactly_at_stop():
    origin = GeoPoint(-25.4, -49.3)
    away = offset_point(origin, 1000, 0)
    stops = [_stop("A", origin.lat, origin.lon), _stop("B", away.lat, away.lon)]
    iti = _line(stops)
    lookup = {s.stop_id: s for s in stops}
    marks = match_fixes([_fix(origin.lat, origin.lon, 100)], iti, lookup)
    assert len(marks) == 1
    assert marks[0].stop_id == "A"
    assert marks[0].distance_m == 0.0
    assert marks[0].time_s == 100


def test_empty_fixes_empty_marks():
    origin = GeoPoint(-25.4, -49.3)
    stops = [_stop("A", origin.lat, origin.lon), _stop("B", origin.lat, origin.lon + 0.01)]
    assert match_fixes([], _line(stops), {s.stop_id: s for s in stops}) == []


def test_unresolvable_stop_raises():
    origin = GeoPoint(-25.4, -49.3)
    stops = [_stop("A", origin.lat, origin.lon), _stop("B", origin.lat, origin.lon + 0.01)]
    with pytest.raises(ValueError, match="not resolvable"):
        match_fixes([_fix(origin.lat, origin.lon, 0)], _line(stops), {"A": stops[0]})


def test_unsorted_fixes_rejected():
    origin = GeoPoint(-25.4, -49.3)
    stops = [_stop("A", origin.lat, origin.lon), _stop("B", origin.lat, origin.lon + 0.01)]
    fixes = [_fix(origin.lat, origin.lon, 100), _fix(origin.lat, origin.lon, 50)]
    with pytest.raises(ValueError, match="sorted"):
        match_fixes(fixes, _line(stops), {s.stop_id: s for s in stops})


def test_nearest_label_matches_bruteforce_scan():
    rng = np.random.default_rng(7)
    origin = GeoPoint(-25.4, -49.3)
    stops = []
    for i in range(10):
        p = offset_point(origin, float(rng.uniform(0, 5000)), float(rng.uniform(0, 5000)))
        stops.append(_stop(f"S{i}", p.lat, p.lon))
    iti = _line(stops)
    lookup = {s.stop_id: s for s in stops}

    for t in range(100):
        p = offset_point(origin, float(rng.uniform(-500, 5500)), float(rng.uniform(-500, 5500)))
        fix = _fix(p.lat, p.lon, t)
        # Exhaustive oracle: scan stops in itinerary order, first minimum wins.
        best_stop, best_d = None, float("inf")
        for s in stops:
            d = haversine_distance(fix, s)
            if d < best_d:
                best_stop, best_d = s.stop_id, d
        marks = match_fixes([fix], iti, lookup, acceptance_radius_m=float("inf"))
        assert len(marks) == 1
        assert marks[0].stop_id == best_stop
        assert marks[0].distance_m == pytest.approx(best_d)


def test_run_collapse_takes_earliest_minimum():
    origin = GeoPoint(-25.4, -49.3)
    stop_a = _stop("A", origin.lat, origin.lon)
    far = offset_point(origin, 5000, 0)
    stop_b = _stop("B", far.lat, far.lon)
    iti = _line([stop_a, stop_b])
    lookup = {"A": stop_a, "B": stop_b}
    offsets = [50.0, 10.0, 10.0, 40.0]  # two fixes tie at the run minimum
    fixes = []
    for t, north in enumerate(offsets):
        p = offset_point(origin, 0, north)
        fixes.append(_fix(p.lat, p.lon, t * 20))
    marks = match_fixes(fixes, iti, lookup)
    assert len(marks) == 1
    assert marks[0].time_s == 20  # earliest fix at the minimum distance
    assert marks[0].distance_m == pytest.approx(10.0, abs=1e-6)


def test_runs_beyond_acceptance_radius_yield_no_mark():
    origin = GeoPoint(-25.4, -49.3)
    stop_a = _stop("A", origin.lat, origin.lon)
    far = offset_point(origin, 5000, 0)
    stop_b = _stop("B", far.lat, far.lon)
    iti = _line([stop_a, stop_b])
    p = offset_point(origin, 0, 150)
    marks = match_fixes([_fix(p.lat, p.lon, 0)], iti, {"A": stop_a, "B": stop_b})
    assert marks == []


def test_case_study_marks(case_dataset):
    iti = case_dataset.itineraries[0]
    fixes = next(iter(case_dataset.fixes.values()))
    marks = sequence_marks(match_fixes(fixes, iti, case_dataset.stops))
    got = [(m.stop_id, format_time_of_day(m.time_s), m.seq_hint) for m in marks]
    assert got == CASE_MARKS
    assert all(m.distance_m <= 100.0 for m in marks)
    # the region-of-uncertainty mark is a near miss, not a stop visit
    assert marks[1].distance_m == pytest.approx(90.0, abs=0.5)
    assert all(m.vehicle_id == "BA020" for m in marks)


def test_case_study_full_trajectory_marks(case_dataset_full):
    iti = case_dataset_full.itineraries[0]
    fixes = next(iter(case_dataset_full.fixes.values()))
    marks = sequence_marks(match_fixes(fixes, iti, case_dataset_full.stops))
    got = [(m.stop_id, format_time_of_day(m.time_s)) for m in marks]
    assert got == [
        ("829001", "06:04:51"),
        ("829010", "06:14:08"),
        ("829002", "06:14:36"),
        ("829003", "06:15:40"),
        ("829004", "06:16:43"),
        ("829005", "06:18:00"),
        ("829006", "06:19:30"),
        ("829007", "06:21:06"),
        ("829008", "06:26:45"),
        ("829009", "06:28:30"),
        ("829010", "06:29:06"),
        ("829001", "06:31:41"),
    ]


# ── sequence_marks ──────────────────────────────────────────────────────


def _mark(stop_id, t):
    return StopMark(stop_id=stop_id, seq_hint=1, time_s=t, distance_m=0.0, vehicle_id="V1")


def test_sequence_marks_sorted_input_unchanged():
    marks = [_mark("A", 1), _mark("B", 2), _mark("C", 3)]
    assert sequence_marks(marks) == marks


def test_sequence_marks_reversed_input():
    marks = [_mark("C", 3), _mark("B", 2), _mark("A", 1)]
    assert sequence_marks(marks) == list(reversed(marks))


def test_sequence_marks_stable_on_ties():
    marks = [_mark("A", 5), _mark("B", 5), _mark("C", 5)]
    assert [m.stop_id for m in sequence_marks(marks)] == ["A", "B", "C"]
