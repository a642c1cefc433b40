"""Trip-to-trip distances, k-NN retrieval and kernel regression over a trip corpus."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Sequence
from zoneinfo import ZoneInfo

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .geo import SpatialIndex, chord_km, haversine_array, unit_vectors
from .trajectory import (SAMPLING_S, PartialTrip, RawTrip, as_points,
                         rdp_simplify, segment_km, suffix_start)

DEFAULT_TZ = "Europe/Lisbon"
VARIANTS = ("aligned_prefix", "best_match", "suffix")
CONTEXT_KEYS = ("none", "call_id", "taxi_id", "day_of_week", "hour_of_day", "stand_id")
TARGETS = ("destination", "travel_time")
# bound on (query points x candidate points) per distance block
_BLOCK_CELLS = 2_000_000


class NoCandidatesError(LookupError):
    pass


@dataclass(frozen=True)
class TripDistanceSpec:
    variant: str = "best_match"
    d_meters: Optional[float] = None
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown distance variant {self.variant!r}")
        if (self.variant == "suffix") != (self.d_meters is not None):
            raise ValueError("d_meters is required for the suffix variant and only for it")
        if self.d_meters is not None and self.d_meters < 0:
            raise ValueError("d_meters must be non-negative")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    @property
    def name(self) -> str:
        if self.variant == "suffix":
            base = f"suffix{self.d_meters:g}m"
        else:
            base = self.variant
        if self.epsilon is not None:
            base += f"_rdp{self.epsilon:g}"
        return base


@dataclass(frozen=True)
class KernelRegressionSpec:
    bandwidth: float = 0.05
    distance: TripDistanceSpec = field(default_factory=TripDistanceSpec)
    context: str = "none"
    target: str = "destination"

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.context not in CONTEXT_KEYS:
            raise ValueError(f"unknown context key {self.context!r}")
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}")

    @property
    def name(self) -> str:
        ctx = "" if self.context == "none" else f"_ctx-{self.context}"
        return f"kr_{self.distance.name}_h{self.bandwidth:g}{ctx}"


# -- reference distances ------------------------------------------------------

def _pair_mean(A: np.ndarray, B: np.ndarray) -> float:
    return float(haversine_array(A[:, 0], A[:, 1], B[:, 0], B[:, 1]).mean())


def aligned_prefix_distance(A, B) -> Optional[float]:
    """Mean haversine between A[k] and B[k]; None when B is shorter than A."""
    A, B = as_points(A), as_points(B)
    if len(A) == 0:
        raise ValueError("query trajectory is empty")
    if len(B) < len(A):
        return None
    return _pair_mean(A, B[: len(A)])


def best_match_distance(A, B) -> Optional[float]:
    """Smallest aligned mean distance over every placement of A inside B."""
    A, B = as_points(A), as_points(B)
    if len(A) == 0:
        raise ValueError("query trajectory is empty")
    m, n = len(A), len(B)
    if n < m:
        return None
    D = haversine_array(A[:, 0, None], A[:, 1, None], B[None, :, 0], B[None, :, 1])
    return float(min(np.trace(D, offset=o) for o in range(n - m + 1)) / m)


def suffix_distance(A, B, d_meters: float) -> Optional[float]:
    A = as_points(A)
    if len(A) == 0:
        raise ValueError("query trajectory is empty")
    s = suffix_start(segment_km(A), d_meters / 1000.0)
    return best_match_distance(A[s:], B)


# -- batched engine -----------------------------------------------------------

def match_table(A, candidates: Sequence[np.ndarray], starts: Sequence[int]):
    """Distances from query ``A`` to many candidates in one pass.

    Returns ``(aligned, best)``: ``aligned[c]`` is the aligned-prefix distance
    and ``best[c, i]`` the best-match distance of the suffix ``A[starts[i]:]``.
    Non-comparable pairs hold ``inf``. Trajectories are (lat, lon) arrays.
    """
    return match_table_xyz(unit_vectors(A), [unit_vectors(b) for b in candidates], starts)


def match_table_xyz(U, candidates: Sequence[np.ndarray], starts: Sequence[int]):
    """:func:`match_table` on precomputed unit vectors."""
    m = len(U)
    starts = list(starts)
    C = len(candidates)
    aligned = np.full(C, np.inf)
    best = np.full((C, len(starts)), np.inf)
    if C == 0 or m == 0:
        return aligned, best
    block: list[int] = []
    cells = 0
    for c in range(C):
        n = len(candidates[c])
        if n == 0:
            continue
        block.append(c)
        cells += n
        if cells * m >= _BLOCK_CELLS:
            _match_block(U, candidates, block, starts, aligned, best)
            block, cells = [], 0
    if block:
        _match_block(U, candidates, block, starts, aligned, best)
    return aligned, best


def _match_block(U, candidates, block, starts, aligned, best):
    m = len(U)
    V = np.concatenate([candidates[c] for c in block])
    lens = np.array([len(candidates[c]) for c in block])
    begin = np.concatenate([[0], np.cumsum(lens)[:-1]])
    N = len(V)
    # shear so that column t holds the diagonal ending at (m-1, t)
    P = np.zeros((m, N + m - 1))
    P[:, m - 1:] = chord_km(U, V)
    s0, s1 = P.strides
    E = as_strided(P, shape=(m, N), strides=(s0 + s1, s1))
    # E[k, t] = D[k, t - (m-1) + k]; R[k, t] sums rows k..m-1 of that diagonal
    R = np.cumsum(E[::-1], axis=0)[::-1]
    pos = np.arange(N) - np.repeat(begin, lens)
    idx = np.array(block)
    ok = lens >= m
    if ok.any():
        aligned[idx[ok]] = R[0, begin[ok] + m - 1] / m
    for i, s in enumerate(starts):
        L = m - s
        vals = np.where(pos >= L - 1, R[s], np.inf)
        best[idx, i] = np.minimum.reduceat(vals, begin) / L


def nadaraya_watson(distances, targets, bandwidth: float):
    """Gaussian-kernel weighted mean of ``targets``.

    Exponents are shifted by the smallest distance, which leaves the weighted
    mean unchanged but keeps the nearest weight at 1. For tiny bandwidths the
    result therefore tends to the nearest target (the mean of the nearest
    ones on ties) instead of underflowing.
    """
    d = np.asarray(distances, dtype=float)
    y = np.asarray(targets, dtype=float)
    if len(d) == 0:
        raise NoCandidatesError("no candidates")
    z = d / bandwidth
    z0 = np.min(z)
    w = np.exp(-(z - z0) * (z + z0))
    total = w.sum()
    if y.ndim == 1:
        return float(w @ y / total)
    return (w @ y) / total


# -- corpus-backed matcher -----------------------------------------------------

def context_value(trip: RawTrip, key: str, tz: ZoneInfo):
    if key == "call_id":
        return trip.origin_call
    if key == "stand_id":
        return trip.origin_stand
    if key == "taxi_id":
        return trip.taxi_id
    if key in ("day_of_week", "hour_of_day"):
        t = datetime.fromtimestamp(trip.start_ts, tz)
        return t.weekday() if key == "day_of_week" else t.hour
    return None


@dataclass
class Neighbor:
    trip_id: str
    distance_km: float
    target: object


@dataclass
class MatchSet:
    """Distances from one query to its candidate pool, computed once."""

    query: PartialTrip
    ids: list
    aligned: np.ndarray
    best: dict  # TripDistanceSpec -> distances aligned with ids


class TripMatcher:
    """Historical trip corpus plus the spatial index used to find candidates.

    ``exact=True`` replaces the geohash range query with a full scan.
    """

    def __init__(self, corpus: Sequence[RawTrip], precision: int = 6,
                 radius_km: float = 1.0, exact: bool = False, tz: str = DEFAULT_TZ):
        self.trips = {}
        self.n_skipped = 0
        for t in corpus:
            if t.n_points < 2:
                self.n_skipped += 1
                continue
            self.trips[t.trip_id] = t
        self.precision = precision
        self.radius_km = radius_km
        self.exact = exact
        self.tz = ZoneInfo(tz)
        self.index = SpatialIndex.build(self.trips.values(), precision)
        self._all_ids = sorted(self.trips)
        self._simplified: dict = {}
        self._xyz: dict = {}
        self._context: dict = {}

    def __len__(self):
        return len(self.trips)

    def target(self, trip_id: str, target: str):
        trip = self.trips[trip_id]
        if target == "destination":
            return trip.polyline[-1]
        return float(SAMPLING_S * (trip.n_points - 1))

    def targets(self, ids, target: str) -> np.ndarray:
        if target == "destination":
            return np.array([self.trips[i].polyline[-1] for i in ids]).reshape(-1, 2)
        return np.array([SAMPLING_S * (self.trips[i].n_points - 1) for i in ids], dtype=float)

    def polyline(self, trip_id: str, epsilon: Optional[float] = None) -> np.ndarray:
        if epsilon is None:
            return self.trips[trip_id].polyline
        cache = self._simplified.setdefault(epsilon, {})
        if trip_id not in cache:
            cache[trip_id] = rdp_simplify(self.trips[trip_id].polyline, epsilon)
        return cache[trip_id]

    def vectors(self, trip_id: str, epsilon: Optional[float] = None) -> np.ndarray:
        cache = self._xyz.setdefault(epsilon, {})
        if trip_id not in cache:
            cache[trip_id] = unit_vectors(self.polyline(trip_id, epsilon))
        return cache[trip_id]

    def context_of(self, trip_id: str, key: str):
        cache = self._context.setdefault(key, {})
        if trip_id not in cache:
            cache[trip_id] = context_value(self.trips[trip_id], key, self.tz)
        return cache[trip_id]

    def candidates(self, query: PartialTrip, exclude=None) -> list:
        if self.exact:
            ids = self._all_ids
        else:
            ids = sorted(self.index.range_query(query.points[0], self.radius_km))
        if exclude is not None:
            ids = [i for i in ids if i != exclude]
        return ids

    def match(self, query: PartialTrip, specs: Sequence[TripDistanceSpec] = (),
              exclude=None) -> MatchSet:
        ids = self.candidates(query, exclude)
        pts = as_points(query.points)
        seg = segment_km(pts)
        raw_specs = [s for s in specs if s.epsilon is None]
        starts = sorted({self._start(s, seg) for s in raw_specs} | {0})
        aligned, table = match_table_xyz(unit_vectors(pts), [self.vectors(i) for i in ids],
                                         starts)
        best = {}
        for s in raw_specs:
            col = starts.index(self._start(s, seg))
            best[s] = table[:, col] if s.variant != "aligned_prefix" else aligned
        by_eps: dict = {}
        for s in specs:
            if s.epsilon is not None:
                by_eps.setdefault(s.epsilon, []).append(s)
        for eps, group in by_eps.items():
            spts = rdp_simplify(pts, eps)
            sseg = segment_km(spts)
            gstarts = sorted({self._start(s, sseg) for s in group} | {0})
            al, tab = match_table_xyz(unit_vectors(spts), [self.vectors(i, eps) for i in ids],
                                      gstarts)
            for s in group:
                if s.variant == "aligned_prefix":
                    best[s] = al
                else:
                    best[s] = tab[:, gstarts.index(self._start(s, sseg))]
        return MatchSet(query=query, ids=ids, aligned=aligned, best=best)

    @staticmethod
    def _start(spec: TripDistanceSpec, seg: np.ndarray) -> int:
        if spec.variant == "suffix":
            return suffix_start(seg, spec.d_meters / 1000.0)
        return 0

    def knn_from(self, ms: MatchSet, k: int, target: str,
                 distances: Optional[np.ndarray] = None) -> list:
        d = ms.aligned if distances is None else distances
        order = [j for j in range(len(ms.ids)) if np.isfinite(d[j])]
        # ids are sorted, so a stable sort on distance breaks ties by trip id
        order.sort(key=lambda j: d[j])
        return [Neighbor(ms.ids[j], float(d[j]), self.target(ms.ids[j], target))
                for j in order[:k]]

    def kr_from(self, ms: MatchSet, spec: KernelRegressionSpec):
        """Kernel regression on a precomputed match set.

        Returns ``(prediction, used_context)``; raises NoCandidatesError when
        even the context-free candidate set is empty.
        """
        d = ms.best[spec.distance] if spec.distance in ms.best else None
        if d is None:
            raise KeyError(f"match set lacks distances for {spec.distance}")
        ok = np.isfinite(d)
        used_context = False
        if spec.context != "none":
            value = context_value(ms.query.base, spec.context, self.tz)
            if value is not None:
                same = np.array([self.context_of(i, spec.context) == value for i in ms.ids],
                                dtype=bool)
                if (ok & same).any():
                    ok = ok & same
                    used_context = True
        if not ok.any():
            raise NoCandidatesError(f"no comparable candidates for trip {ms.query.trip_id}")
        ids = [i for i, keep in zip(ms.ids, ok) if keep]
        y = self.targets(ids, spec.target)
        return nadaraya_watson(d[ok], y, spec.bandwidth), used_context


def knn_query(query: PartialTrip, matcher: TripMatcher, k: int = 10,
              spec: TripDistanceSpec = TripDistanceSpec("aligned_prefix"),
              target: str = "destination", exclude=None) -> list:
    """Up to ``k`` nearest corpus trips, nearest first, ties broken by trip id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    ms = matcher.match(query, [spec], exclude=exclude)
    return matcher.knn_from(ms, k, target, ms.best[spec])


def kernel_regress(query: PartialTrip, spec: KernelRegressionSpec, matcher: TripMatcher,
                   exclude=None):
    ms = matcher.match(query, [spec.distance], exclude=exclude)
    return matcher.kr_from(ms, spec)[0]
