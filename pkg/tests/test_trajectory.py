import json

import numpy as np
import pytest

from tripcast.geo import haversine_km
from tripcast.trajectory import (PolylineError, compute_kinematics, detect_missing_updates,
                                 format_polyline, parse_polyline, rdp_mask, rdp_simplify,
                                 total_travel_time_s, truncate_at_cutoff)

from conftest import PORTO, make_trip, random_walk, straight_line
from oracles import destination_point, point_segment_deg


# -- parsing -----------------------------------------------------------------

def test_parse_empty():
    assert parse_polyline("[]").shape == (0, 2)


def test_parse_swaps_order():
    assert parse_polyline("[[-8.61,41.15]]").tolist() == [[41.15, -8.61]]


@pytest.mark.parametrize("text", ["[[1,2],[3]]", "not json", "[[1,2,3]]", '[["a","b"]]'])
def test_parse_rejects_garbage(text):
    with pytest.raises(PolylineError):
        parse_polyline(text)


def test_round_trip_canonical(rng):
    for _ in range(50):
        pts = np.round(random_walk(rng, int(rng.integers(0, 40))), 6)
        text = json.dumps([[lon, lat] for lat, lon in pts.tolist()], separators=(",", ":"))
        assert format_polyline(parse_polyline(text)) == text


# -- missing updates ---------------------------------------------------------

def test_identical_points_not_flagged():
    assert not detect_missing_updates([PORTO, PORTO], 100)


def test_one_km_jump_is_240kmh():
    b = destination_point(*PORTO, 0, 1.0)
    assert detect_missing_updates([PORTO, b], 160)
    assert not detect_missing_updates([PORTO, b], 241)


def test_constructed_jump_flagged_for_all_limits():
    # 60 km/h is 0.25 km per 15 s
    pts = [PORTO]
    for k in range(1, 30):
        step = 2.0 if k == 15 else 0.25
        pts.append(destination_point(*pts[-1], 90, step))
    for v in (100, 120, 140, 160):
        assert detect_missing_updates(pts, v)
    steady = [PORTO]
    for _ in range(29):
        steady.append(destination_point(*steady[-1], 90, 0.25))
    assert not any(detect_missing_updates(steady, v) for v in (100, 120, 140, 160))


def test_single_point_never_flagged():
    assert not detect_missing_updates([PORTO], 1)


# -- RDP ---------------------------------------------------------------------

def test_collinear_reduced_to_endpoints():
    pts = straight_line(PORTO, 3)
    assert rdp_simplify(pts, 1e-6).tolist() == pts[[0, 2]].tolist()


def test_eps_zero_keeps_zigzag():
    pts = np.array([[0, 0], [1, 1], [2, 0], [3, 1], [4, 0]], dtype=float) * 1e-3 + PORTO
    assert len(rdp_simplify(pts, 0.0)) == 5


def _max_removed_deviation(pts, mask):
    kept = np.flatnonzero(mask)
    worst = 0.0
    for a, b in zip(kept[:-1], kept[1:]):
        for i in range(a + 1, b):
            worst = max(worst, point_segment_deg(pts[i], pts[a], pts[b]))
    return worst


def test_random_walk_deviation_bounded(rng):
    pts = random_walk(rng, 100, step=1e-4)
    eps = 5e-5
    mask = rdp_mask(pts, eps)
    assert mask[0] and mask[-1]
    assert _max_removed_deviation(pts, mask) <= eps
    assert mask.sum() < 100


def test_rdp_idempotent(rng):
    pts = random_walk(rng, 80, step=1e-4)
    once = rdp_simplify(pts, 2e-5)
    assert np.array_equal(rdp_simplify(once, 2e-5), once)


def test_rdp_backtrack_point_kept():
    # the middle point lies on the chord's line but beyond the end point
    pts = np.array([[0, 0], [3, 0], [2, 0]], dtype=float) * 1e-3 + PORTO
    assert len(rdp_simplify(pts, 1e-6)) == 3


def test_rdp_short_inputs():
    assert len(rdp_simplify(np.empty((0, 2)), 1e-5)) == 0
    assert len(rdp_simplify([PORTO], 1e-5)) == 1
    with pytest.raises(ValueError):
        rdp_simplify([PORTO, PORTO], -1.0)


# -- kinematics --------------------------------------------------------------

def test_single_point_kinematics():
    k = compute_kinematics([PORTO])
    assert k.traveled_km == 0 and k.shape_complexity == 1
    assert all(v == 0 for v in k.speeds_last_d.values())
    assert k.overall_speed == 0


def test_straight_constant_speed():
    pts = [PORTO]
    for _ in range(3):
        pts.append(destination_point(*pts[-1], 0, 0.2))
    k = compute_kinematics(pts)
    assert k.shape_complexity == pytest.approx(1.0, abs=1e-9)
    seg_speed = haversine_km(pts[0], pts[1]) / 15 * 3600
    assert k.overall_speed == pytest.approx(seg_speed, rel=1e-9)
    assert k.overall_accel == pytest.approx(0.0, abs=1e-6)


def test_out_and_back_complexity_uses_floor():
    far = destination_point(*PORTO, 45, 1.0)
    pts = [PORTO, far, PORTO]
    k = compute_kinematics(pts)
    assert k.first_last_km == 0.0
    expected = k.traveled_km / 1e-6
    assert k.shape_complexity == pytest.approx(expected)
    assert np.isfinite(k.shape_complexity) and k.shape_complexity > 1e5


def test_direction_toward_center():
    start = destination_point(*PORTO, 0, 3.0)
    mid = destination_point(*PORTO, 0, 2.0)
    assert compute_kinematics([start, mid], center=PORTO).toward_center
    assert not compute_kinematics([mid, start], center=PORTO).toward_center
    # equal distances count as toward
    assert compute_kinematics([start, start], center=PORTO).toward_center


def test_suffix_window_speed():
    # slow then fast: the 100 m window only sees the fast tail
    pts = [PORTO]
    for step in [0.05] * 10 + [0.25] * 3:
        pts.append(destination_point(*pts[-1], 90, step))
    k = compute_kinematics(pts)
    fast = 0.25 / 15 * 3600
    assert k.speeds_last_d[100] == pytest.approx(fast, rel=1e-6)
    assert k.speeds_last_d[10] == pytest.approx(fast, rel=1e-6)
    assert k.overall_speed < fast
    assert k.overall_accel > 0


def test_traveled_is_sum_of_pairs(rng):
    pts = random_walk(rng, 30)
    total = sum(haversine_km(a, b) for a, b in zip(pts[:-1], pts[1:]))
    assert compute_kinematics(pts).traveled_km == pytest.approx(total, rel=1e-12)


# -- truncation / durations --------------------------------------------------

def test_cutoff_before_start():
    trip = make_trip("A", straight_line(PORTO, 5), start_ts=1000)
    assert truncate_at_cutoff(trip, 999) is None


def test_cutoff_at_last_point_is_complete():
    trip = make_trip("A", straight_line(PORTO, 5), start_ts=1000)
    assert truncate_at_cutoff(trip, 1000 + 60) is None
    assert truncate_at_cutoff(trip, 1000 + 59).n_points == 4


def test_twenty_points_sixty_seconds():
    trip = make_trip("A", straight_line(PORTO, 20), start_ts=1000)
    pt = truncate_at_cutoff(trip, 1060)
    # enumerate timestamps on the 15 s grid that are not after the cutoff
    expected = [k for k in range(20) if 1000 + 15 * k <= 1060]
    assert pt.n_points == len(expected) == 5
    assert np.array_equal(pt.points, trip.polyline[:5])
    assert pt.elapsed_s == 60


def test_travel_time():
    assert total_travel_time_s(make_trip("A", straight_line(PORTO, 2))) == 15
    assert total_travel_time_s(make_trip("A", straight_line(PORTO, 41))) == 600
    with pytest.raises(ValueError):
        total_travel_time_s(make_trip("A", [PORTO]))


def test_remaining_time_consistency(rng):
    checked = 0
    for i in range(100):
        n = int(rng.integers(2, 80))
        trip = make_trip(f"T{i}", straight_line(PORTO, n), start_ts=10_000)
        cutoff = 10_000 + int(rng.integers(0, 15 * n))
        pt = truncate_at_cutoff(trip, cutoff)
        if pt is None:
            continue
        elapsed_rounded = 15 * ((cutoff - 10_000) // 15)
        assert pt.observed_s == elapsed_rounded
        assert total_travel_time_s(trip) - pt.observed_s == 15 * (n - pt.n_points)
        checked += 1
    assert checked > 50
