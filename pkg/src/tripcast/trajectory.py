"""Trip records, polyline parsing, cleaning, simplification and kinematics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geo import GeoPoint, haversine_array, haversine_km

SAMPLING_S = 15
SPEED_WINDOWS_M = (10, 20, 50, 100, 200)
SPEED_LIMITS_KMH = (100, 120, 140, 160)
# Porto city hall vicinity; configurable wherever it is used.
CITY_CENTER = GeoPoint(41.1579, -8.6291)
COMPLEXITY_FLOOR_KM = 1e-6


class PolylineError(ValueError):
    pass


@dataclass(frozen=True)
class RawTrip:
    """One historical journey. Point k was recorded at ``start_ts + 15 k``."""

    trip_id: str
    call_type: str
    origin_call: Optional[int]
    origin_stand: Optional[int]
    taxi_id: int
    start_ts: int
    day_type: str
    missing_flag: bool  # as shipped in the source file; not trusted
    polyline: np.ndarray = field(repr=False)  # (n, 2) of (lat, lon)

    @property
    def n_points(self) -> int:
        return len(self.polyline)

    @property
    def destination(self) -> GeoPoint:
        lat, lon = self.polyline[-1]
        return GeoPoint(float(lat), float(lon))

    @property
    def end_ts(self) -> int:
        return self.start_ts + SAMPLING_S * max(self.n_points - 1, 0)


@dataclass(frozen=True)
class PartialTrip:
    """A trip observed up to ``cutoff_ts``."""

    base: RawTrip
    points: np.ndarray = field(repr=False)
    cutoff_ts: int

    @property
    def trip_id(self) -> str:
        return self.base.trip_id

    @property
    def elapsed_s(self) -> int:
        return self.cutoff_ts - self.base.start_ts

    @property
    def observed_s(self) -> int:
        """Time spanned by the observed points, on the 15 s grid."""
        return SAMPLING_S * (len(self.points) - 1)

    @property
    def n_points(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Kinematics:
    traveled_km: float
    first_last_km: float
    shape_complexity: float
    toward_center: bool
    speeds_last_d: dict
    accel_last_d: dict
    overall_speed: float
    overall_accel: float
    n_points: int
    missing_by_vhat: dict


def as_points(points) -> np.ndarray:
    return np.asarray(points, dtype=float).reshape(-1, 2)


def parse_polyline(text: str, row_id=None) -> np.ndarray:
    """Parse ``[[lon, lat], ...]`` into an (n, 2) array of (lat, lon)."""
    try:
        raw = json.loads(text)
        arr = np.asarray(raw, dtype=float)
    except (ValueError, TypeError) as exc:
        raise PolylineError(f"row {row_id}: malformed polyline: {exc}") from None
    if arr.size == 0:
        return np.empty((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.isfinite(arr).all():
        raise PolylineError(f"row {row_id}: polyline must be a list of [lon, lat] pairs")
    return arr[:, ::-1].copy()


def format_polyline(points) -> str:
    pts = as_points(points)
    return json.dumps([[float(lon), float(lat)] for lat, lon in pts], separators=(",", ":"))


def segment_km(points) -> np.ndarray:
    pts = as_points(points)
    if len(pts) < 2:
        return np.zeros(0)
    return haversine_array(pts[:-1, 0], pts[:-1, 1], pts[1:, 0], pts[1:, 1])


def detect_missing_updates(points, v_hat_kmh: float) -> bool:
    """True iff some consecutive pair implies a speed above ``v_hat_kmh``."""
    seg = segment_km(points)
    if len(seg) == 0:
        return False
    speeds = seg / (SAMPLING_S / 3600.0)
    return bool((speeds > v_hat_kmh).any())


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # distance to the closed segment [a, b]; a point-to-line distance would let
    # back-tracking GPS points vanish behind the chord
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(points[:, 0] - a[0], points[:, 1] - a[1])
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(points[:, 0] - proj[:, 0], points[:, 1] - proj[:, 1])


def rdp_mask(points, epsilon: float) -> np.ndarray:
    """Boolean keep-mask of the Ramer-Douglas-Peucker simplification."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    pts = as_points(points)
    n = len(pts)
    keep = np.ones(n, dtype=bool)
    if n < 3:
        return keep
    keep[1:-1] = False
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = _segment_distance(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            m = i + 1 + k
            keep[m] = True
            stack.append((i, m))
            stack.append((m, j))
    return keep


def rdp_simplify(points, epsilon: float) -> np.ndarray:
    """Simplify a polyline; distances are measured in raw degree space."""
    pts = as_points(points)
    return pts[rdp_mask(pts, epsilon)]


def suffix_start(seg_km: np.ndarray, d_km: float) -> int:
    """Index of the shortest point suffix whose length is at least ``d_km``.

    Returns 0 when the whole path is shorter than ``d_km``.
    """
    if len(seg_km) == 0:
        return 0
    if d_km <= 0:
        return len(seg_km)
    tail = np.cumsum(seg_km[::-1])
    hit = np.nonzero(tail >= d_km)[0]
    if len(hit) == 0:
        return 0
    # tail[i] covers the last i+1 segments -> suffix starts at n_seg - (i+1)
    return len(seg_km) - (int(hit[0]) + 1)


def _window_speed(seg_km: np.ndarray) -> float:
    if len(seg_km) == 0:
        return 0.0
    return float(seg_km.sum() / (SAMPLING_S * len(seg_km)) * 3600.0)


def _window_accel(seg_km: np.ndarray) -> float:
    # (last segment speed - first segment speed) / window duration, km/h per s
    if len(seg_km) < 2:
        return 0.0
    v = seg_km * (3600.0 / SAMPLING_S)
    return float((v[-1] - v[0]) / (SAMPLING_S * len(seg_km)))


def compute_kinematics(points, center=CITY_CENTER,
                       speed_windows_m=SPEED_WINDOWS_M,
                       speed_limits=SPEED_LIMITS_KMH) -> Kinematics:
    pts = as_points(points)
    if len(pts) == 0:
        raise ValueError("kinematics need at least one point")
    seg = segment_km(pts)
    traveled = float(seg.sum())
    first_last = haversine_km(pts[0], pts[-1])
    if traveled == 0.0:
        complexity = 1.0
    else:
        complexity = traveled / max(first_last, COMPLEXITY_FLOOR_KM)
    toward = haversine_km(center, pts[-1]) <= haversine_km(center, pts[0])
    speeds, accels = {}, {}
    for d in speed_windows_m:
        s = suffix_start(seg, d / 1000.0)
        speeds[d] = _window_speed(seg[s:])
        accels[d] = _window_accel(seg[s:])
    return Kinematics(
        traveled_km=traveled,
        first_last_km=first_last,
        shape_complexity=complexity,
        toward_center=bool(toward),
        speeds_last_d=speeds,
        accel_last_d=accels,
        overall_speed=_window_speed(seg),
        overall_accel=_window_accel(seg),
        n_points=len(pts),
        missing_by_vhat={v: detect_missing_updates(pts, v) for v in speed_limits},
    )


def truncate_at_cutoff(trip: RawTrip, cutoff_ts: int) -> Optional[PartialTrip]:
    """The observed prefix of ``trip`` at ``cutoff_ts``, or None if not ongoing."""
    n = trip.n_points
    if n == 0 or not trip.start_ts <= cutoff_ts < trip.start_ts + SAMPLING_S * (n - 1):
        return None
    k = (cutoff_ts - trip.start_ts) // SAMPLING_S
    return PartialTrip(base=trip, points=trip.polyline[: k + 1], cutoff_ts=int(cutoff_ts))


def as_partial(trip: RawTrip, cutoff_ts: Optional[int] = None) -> PartialTrip:
    """Treat a (test) trip as observed up to its last point."""
    if trip.n_points == 0:
        raise ValueError(f"trip {trip.trip_id} has no points")
    cutoff = trip.end_ts if cutoff_ts is None else int(cutoff_ts)
    return PartialTrip(base=trip, points=trip.polyline, cutoff_ts=cutoff)


def total_travel_time_s(trip: RawTrip) -> int:
    if trip.n_points < 2:
        raise ValueError(f"trip {trip.trip_id}: travel time needs at least 2 points")
    return SAMPLING_S * (trip.n_points - 1)


def with_polyline(trip: RawTrip, points) -> RawTrip:
    return replace(trip, polyline=as_points(points))
