import numpy as np
import pytest

from tripcast.geo import haversine_km
from tripcast.matching import (KernelRegressionSpec, NoCandidatesError, TripDistanceSpec,
                               TripMatcher, aligned_prefix_distance, best_match_distance,
                               kernel_regress, knn_query, match_table, nadaraya_watson,
                               suffix_distance)
from tripcast.trajectory import PartialTrip, as_partial

from conftest import PORTO, make_trip, random_walk, straight_line
from oracles import (aligned_mean, destination_point, offsets_min_mean, suffix_points,
                     weighted_mean)


def airport_pair():
    """Two trips with different starts sharing their final ~900 m."""
    tail = [destination_point(*PORTO, 0, 2.0)]
    for _ in range(6):
        tail.append(destination_point(*tail[-1], 20, 0.15))
    west = [destination_point(*tail[0], 270, 0.2 * k) for k in range(12, 0, -1)]
    south = [destination_point(*tail[0], 180, 0.2 * k) for k in range(8, 0, -1)]
    return np.array(south + tail), np.array(west + tail)


# -- reference distances -----------------------------------------------------

def test_aligned_identity(rng):
    A = random_walk(rng, 10)
    assert aligned_prefix_distance(A, A) == 0.0


def test_aligned_single_point_prefix(rng):
    B = random_walk(rng, 10)
    assert aligned_prefix_distance(B[:1], B) == 0.0


def test_aligned_shift_north(rng):
    A = random_walk(rng, 10)
    B = A + [0.001, 0.0]
    expected = aligned_mean(A.tolist(), B.tolist())
    assert aligned_prefix_distance(A, B) == pytest.approx(expected, rel=1e-12)
    # a pure northward shift moves every point by the same arc
    assert aligned_prefix_distance(A, B) == pytest.approx(haversine_km(A[0], B[0]), rel=1e-9)


def test_not_comparable_returns_none(rng):
    A = random_walk(rng, 10)
    assert aligned_prefix_distance(A, A[:5]) is None
    assert best_match_distance(A, A[:5]) is None


def test_best_match_middle_slice(rng):
    B = random_walk(rng, 30)
    assert best_match_distance(B[10:18], B) == 0.0


def test_best_match_equal_lengths(rng):
    A, B = random_walk(rng, 12), random_walk(rng, 12)
    assert best_match_distance(A, B) == aligned_prefix_distance(A, B)


def test_best_match_offset_oracle(rng):
    for _ in range(30):
        A = random_walk(rng, int(rng.integers(1, 8)))
        B = random_walk(rng, int(rng.integers(1, 15)))
        got = best_match_distance(A, B)
        ref = offsets_min_mean(A.tolist(), B.tolist())
        if ref is None:
            assert got is None
            continue
        assert got == pytest.approx(ref, rel=1e-12)
        assert got <= aligned_prefix_distance(A, B) + 1e-15


def test_suffix_longer_than_trip(rng):
    A, B = random_walk(rng, 6), random_walk(rng, 20)
    assert suffix_distance(A, B, 1e6) == best_match_distance(A, B)


def test_suffix_zero_is_last_point(rng):
    A, B = random_walk(rng, 6), random_walk(rng, 20)
    expected = min(haversine_km(A[-1], b) for b in B)
    assert suffix_distance(A, B, 0) == pytest.approx(expected, rel=1e-12)


def test_suffix_matches_oracle(rng):
    for _ in range(20):
        A, B = random_walk(rng, 12), random_walk(rng, 25)
        d = float(rng.choice([100, 300, 700, 1500]))
        ref = offsets_min_mean(suffix_points(A.tolist(), d / 1000), B.tolist())
        assert suffix_distance(A, B, d) == pytest.approx(ref, rel=1e-12)


def test_airport_scenario():
    A, B = airport_pair()
    assert suffix_distance(A, B, 500) == 0.0
    assert aligned_prefix_distance(A, B) > 0.5


def test_spec_validation():
    with pytest.raises(ValueError):
        TripDistanceSpec("suffix")
    with pytest.raises(ValueError):
        TripDistanceSpec("best_match", d_meters=100)
    with pytest.raises(ValueError):
        TripDistanceSpec("nearest")
    with pytest.raises(ValueError):
        KernelRegressionSpec(bandwidth=0.0)
    with pytest.raises(ValueError):
        KernelRegressionSpec(context="colour")


# -- batched engine ----------------------------------------------------------

def test_match_table_equals_reference(rng):
    A = random_walk(rng, 9)
    cands = [random_walk(rng, int(rng.integers(1, 30))) for _ in range(40)]
    starts = [0, 3, 8]
    aligned, best = match_table(A, cands, starts)
    for c, B in enumerate(cands):
        ref = aligned_prefix_distance(A, B)
        if ref is None:
            assert aligned[c] == np.inf
        else:
            assert aligned[c] == pytest.approx(ref, rel=1e-9)
        for i, s in enumerate(starts):
            ref = best_match_distance(A[s:], B)
            if ref is None:
                assert best[c, i] == np.inf
            else:
                assert best[c, i] == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_match_table_exact_zero_for_identical_points():
    A, B = airport_pair()
    _, best = match_table(A, [B], [len(A) - 4])
    assert best[0, 0] == 0.0


# -- kernel regression -------------------------------------------------------

def test_kr_single_candidate():
    assert nadaraya_watson([0.3], [123.0], 0.05) == 123.0


def test_kr_huge_bandwidth_is_mean(rng):
    y = rng.uniform(100, 2000, 20)
    assert nadaraya_watson(rng.uniform(0, 5, 20), y, 1e9) == pytest.approx(y.mean(), rel=1e-9)


def test_kr_tiny_bandwidth_is_nearest(rng):
    d = rng.uniform(0, 5, 20)
    y = rng.uniform(100, 2000, 20)
    assert nadaraya_watson(d, y, 1e-9) == y[np.argmin(d)]


def test_kr_hand_computed():
    d = [0.01, 0.02, 0.05, 0.10, 0.03]
    y = [100.0, 200.0, 300.0, 400.0, 500.0]
    # weights exp(-(d/0.05)^2): 0.960789, 0.852144, 0.367879, 0.018316, 0.697676
    expected = (0.960789439 * 100 + 0.852143789 * 200 + 0.367879441 * 300
                + 0.018315639 * 400 + 0.697676326 * 500) / (
        0.960789439 + 0.852143789 + 0.367879441 + 0.018315639 + 0.697676326)
    assert nadaraya_watson(d, y, 0.05) == pytest.approx(expected, rel=1e-8)
    assert nadaraya_watson(d, y, 0.05) == pytest.approx(weighted_mean(d, y, 0.05), rel=1e-12)


def test_kr_destination_in_bbox(rng):
    d = rng.uniform(0, 1, 15)
    Y = rng.uniform([41.1, -8.7], [41.2, -8.5], size=(15, 2))
    p = nadaraya_watson(d, Y, 0.05)
    assert (Y.min(0) <= p).all() and (p <= Y.max(0)).all()


def test_kr_order_invariant(rng):
    d = rng.uniform(0, 1, 15)
    y = rng.uniform(0, 100, 15)
    perm = rng.permutation(15)
    assert nadaraya_watson(d, y, 0.5) == pytest.approx(nadaraya_watson(d[perm], y[perm], 0.5),
                                                       rel=1e-12)


def test_kr_empty_raises():
    with pytest.raises(NoCandidatesError):
        nadaraya_watson([], [], 0.05)


# -- corpus matcher ----------------------------------------------------------

def _corpus(rng, n):
    return [make_trip(f"T{i:03d}", random_walk(rng, int(rng.integers(5, 40)), step=0.001),
                      origin_call=int(i % 4), taxi_id=20000000 + i % 7)
            for i in range(n)]


def test_own_trip_first(rng):
    corpus = _corpus(rng, 20)
    m = TripMatcher(corpus)
    q = PartialTrip(corpus[3], corpus[3].polyline[:4], corpus[3].start_ts + 45)
    nbrs = knn_query(q, m, k=3)
    assert nbrs[0].trip_id == "T003" and nbrs[0].distance_km == 0.0


def test_k_larger_than_pool(rng):
    corpus = _corpus(rng, 5)
    m = TripMatcher(corpus, exact=True)
    q = PartialTrip(corpus[0], corpus[0].polyline[:2], 0)
    assert len(knn_query(q, m, k=50)) == 5


def test_knn_equals_linear_scan(rng):
    corpus = _corpus(rng, 50)
    m = TripMatcher(corpus, exact=True)
    query = make_trip("Q", random_walk(rng, 4, step=0.001))
    pq = as_partial(query)
    got = knn_query(pq, m, k=10)
    scored = []
    for t in corpus:
        d = aligned_mean(query.polyline.tolist(), t.polyline.tolist())
        if d is not None:
            scored.append((d, t.trip_id))
    scored.sort()
    assert [n.trip_id for n in got] == [tid for _, tid in scored[:10]]
    for n, (d, _) in zip(got, scored):
        assert n.distance_km == pytest.approx(d, rel=1e-9)


def test_kr_via_matcher_single_candidate():
    trip = make_trip("A", straight_line(PORTO, 10))
    m = TripMatcher([trip])
    q = as_partial(make_trip("Q", straight_line(PORTO, 3)))
    spec = KernelRegressionSpec(0.05, target="travel_time")
    assert kernel_regress(q, spec, m) == 135.0
    dest = kernel_regress(q, KernelRegressionSpec(0.05), m)
    assert np.array_equal(dest, trip.polyline[-1])


def test_kr_tiny_bandwidth_equals_1nn(rng):
    corpus = _corpus(rng, 30)
    m = TripMatcher(corpus, exact=True)
    q = as_partial(make_trip("Q", random_walk(rng, 3, step=0.001)))
    spec = KernelRegressionSpec(1e-9, TripDistanceSpec("aligned_prefix"))
    nn = knn_query(q, m, k=1)[0]
    assert np.array_equal(kernel_regress(q, spec, m), nn.target)


def test_context_filter(rng):
    corpus = _corpus(rng, 30)
    m = TripMatcher(corpus, exact=True)
    base = make_trip("Q", random_walk(rng, 3, step=0.001), origin_call=2)
    q = as_partial(base)
    ms = m.match(q, [TripDistanceSpec()])
    plain, used = m.kr_from(ms, KernelRegressionSpec(0.5))
    assert not used
    ctx, used = m.kr_from(ms, KernelRegressionSpec(0.5, context="call_id"))
    assert used
    same = [i for i, t in enumerate(ms.ids) if m.trips[t].origin_call == 2]
    d = ms.best[TripDistanceSpec()]
    same = [i for i in same if np.isfinite(d[i])]
    Y = m.targets([ms.ids[i] for i in same], "destination")
    assert np.allclose(ctx, nadaraya_watson(d[same], Y, 0.5), rtol=1e-12)


def test_missing_context_falls_back(rng):
    corpus = _corpus(rng, 10)
    m = TripMatcher(corpus, exact=True)
    q = as_partial(make_trip("Q", random_walk(rng, 3, step=0.001), origin_call=None))
    ms = m.match(q, [TripDistanceSpec()])
    a, used = m.kr_from(ms, KernelRegressionSpec(0.5, context="call_id"))
    b, _ = m.kr_from(ms, KernelRegressionSpec(0.5))
    assert not used and np.array_equal(a, b)


def test_exclude_drops_self(rng):
    corpus = _corpus(rng, 10)
    m = TripMatcher(corpus, exact=True)
    q = as_partial(corpus[0])
    assert "T000" not in m.candidates(q, exclude="T000")
