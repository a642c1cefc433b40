"""Property-based checks of the documented invariants."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tripcast.geo import geohash_bbox, geohash_encode, haversine_km, index_build
from tripcast.matching import (aligned_prefix_distance, best_match_distance, match_table,
                               nadaraya_watson)
from tripcast.metrics import mhd_score, rmsle_score
from tripcast.models import GradientBoostingRegressor, RegressionTree, quantile_keep_mask
from tripcast.trajectory import (compute_kinematics, detect_missing_updates, rdp_simplify,
                                 truncate_at_cutoff)

from conftest import make_trip
from oracles import point_segment_deg

lat = st.floats(-89.9, 89.9, allow_nan=False)
lon = st.floats(-179.9, 179.9, allow_nan=False)
point = st.tuples(lat, lon)
porto_pt = st.tuples(st.floats(41.10, 41.25), st.floats(-8.70, -8.50))
polyline = st.lists(porto_pt, min_size=1, max_size=25).map(np.array)
fast = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@fast
@given(point, point, point)
def test_haversine_metric(a, b, c):
    ab, ba = haversine_km(a, b), haversine_km(b, a)
    assert ab == ba
    assert haversine_km(a, a) == 0.0
    assert ab <= haversine_km(a, c) + haversine_km(c, b) + 1e-9 * max(1.0, ab)


@fast
@given(point, st.integers(1, 11))
def test_geohash_prefix_and_containment(p, k):
    long_code = geohash_encode(p[0], p[1], k + 1)
    assert long_code[:k] == geohash_encode(p[0], p[1], k)
    lat_lo, lat_hi, lon_lo, lon_hi = geohash_bbox(long_code)
    assert lat_lo <= p[0] <= lat_hi and lon_lo <= p[1] <= lon_hi


@fast
@given(st.lists(polyline, min_size=1, max_size=6), porto_pt)
def test_index_superset_of_own_cell(lines, q):
    trips = [make_trip(f"T{i}", pl) for i, pl in enumerate(lines)]
    idx = index_build(trips)
    own = idx.cell_members(geohash_encode(q[0], q[1], 6))
    assert own <= idx.range_query(q)
    for t in trips:
        assert any(t.trip_id in ids for ids in idx.cells.values())


@fast
@given(polyline, st.sampled_from([0.0, 1e-6, 5e-6, 5e-5, 1e-3]))
def test_rdp_properties(pts, eps):
    out = rdp_simplify(pts, eps)
    assert len(out) <= len(pts)
    assert np.array_equal(out[0], pts[0]) and np.array_equal(out[-1], pts[-1])
    assert np.array_equal(rdp_simplify(out, eps), out)
    # subsequence and deviation bound
    j = 0
    kept = []
    for i, p in enumerate(pts):
        if j < len(out) and np.array_equal(p, out[j]):
            kept.append(i)
            j += 1
    assert j == len(out)
    for a, b in zip(kept[:-1], kept[1:]):
        for i in range(a + 1, b):
            assert point_segment_deg(pts[i], pts[a], pts[b]) <= eps + 1e-15


@fast
@given(polyline)
def test_missing_updates_monotone(pts):
    flags = [detect_missing_updates(pts, v) for v in (100, 120, 140, 160)]
    if flags[-1]:
        assert all(flags)
    assert flags == sorted(flags, reverse=True)


@fast
@given(polyline)
def test_kinematics_invariants(pts):
    k = compute_kinematics(pts)
    if k.first_last_km > 0:
        assert k.shape_complexity >= 1 - 1e-9
    assert all(np.isfinite(v) and v >= 0 for v in k.speeds_last_d.values())
    assert np.isfinite(k.shape_complexity)


@fast
@given(polyline, st.integers(0, 400))
def test_truncation_is_prefix(pts, offset):
    trip = make_trip("A", pts, start_ts=1000)
    pt = truncate_at_cutoff(trip, 1000 + offset)
    if pt is not None:
        assert np.array_equal(pt.points, pts[: pt.n_points])
        assert 1000 + 15 * (pt.n_points - 1) <= pt.cutoff_ts < trip.end_ts


@fast
@given(polyline, polyline)
def test_best_match_not_worse(a, b):
    al = aligned_prefix_distance(a, b)
    bm = best_match_distance(a, b)
    assert (al is None) == (bm is None)
    if al is not None:
        assert bm <= al + 1e-12


@fast
@given(polyline, st.lists(polyline, min_size=1, max_size=5))
def test_batched_engine_agrees(a, cands):
    aligned, best = match_table(a, cands, [0])
    for c, b in enumerate(cands):
        ref = best_match_distance(a, b)
        if ref is None:
            assert best[c, 0] == np.inf
        else:
            assert abs(best[c, 0] - ref) <= 1e-9 * max(ref, 1e-3)


@fast
@given(arrays(float, st.integers(1, 30), elements=st.floats(0, 5)),
       st.sampled_from([0.005, 0.05, 0.5, 1e9]), st.integers(0, 2**31))
def test_kr_convex_and_order_free(d, h, seed):
    rng = np.random.default_rng(seed)
    Y = rng.uniform([41.1, -8.7], [41.2, -8.5], size=(len(d), 2))
    p = nadaraya_watson(d, Y, h)
    assert (Y.min(0) - 1e-12 <= p).all() and (p <= Y.max(0) + 1e-12).all()
    perm = rng.permutation(len(d))
    assert np.allclose(nadaraya_watson(d[perm], Y[perm], h), p, rtol=1e-12, atol=0)


@fast
@given(st.lists(porto_pt, min_size=1, max_size=20), st.integers(0, 2**31))
def test_metric_permutation(pts, seed):
    rng = np.random.default_rng(seed)
    P = np.array(pts)
    A = P[::-1]
    perm = rng.permutation(len(P))
    assert np.isclose(mhd_score(P, A), mhd_score(P[perm], A[perm]), rtol=1e-12)
    t = np.abs(P[:, 0])
    assert np.isclose(rmsle_score(t, t[::-1]), rmsle_score(t[perm], t[::-1][perm]), rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 60), st.integers(0, 2**31))
def test_tree_predictions_in_range(n, seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(n, 3)), rng.normal(size=n)
    tree = RegressionTree(max_features="sqrt", random_state=seed % 1000).fit(X, y)
    p = tree.predict(rng.normal(size=(20, 3)) * 5)
    assert y.min() <= p.min() and p.max() <= y.max()


@settings(max_examples=10, deadline=None)
@given(st.integers(20, 80), st.integers(0, 2**31))
def test_gbrt_monotone(n, seed):
    rng = np.random.default_rng(seed)
    X, y = rng.normal(size=(n, 3)), rng.normal(size=n)
    g = GradientBoostingRegressor(n_estimators=15, random_state=0).fit(X, y)
    assert (np.diff(g.train_score_) <= 1e-12).all()


@fast
@given(arrays(float, st.integers(10, 300), elements=st.floats(0, 1000)))
def test_outlier_keep_count(err):
    keep = quantile_keep_mask(err, 0.9)
    assert keep.sum() >= np.ceil(0.9 * len(err)) - 1
    assert err[keep].max() <= np.quantile(err, 0.9)
