"""Synthetic Porto-like trip corpora for tests and demos."""

from __future__ import annotations

import math

import numpy as np

from .trajectory import SAMPLING_S, RawTrip

CENTER = (41.1579, -8.6291)
KM_PER_DEG_LAT = 111.32


def offset(origin, north_km, east_km):
    lat = origin[0] + north_km / KM_PER_DEG_LAT
    lon = origin[1] + east_km / (KM_PER_DEG_LAT * math.cos(math.radians(origin[0])))
    return lat, lon


def _walk(waypoints, speed_kmh, rng, noise_km=0.005):
    """Sample a piecewise-linear route every 15 s at a noisy speed."""
    wps = np.asarray(waypoints, dtype=float)
    scale = np.array([KM_PER_DEG_LAT, KM_PER_DEG_LAT * math.cos(math.radians(wps[0, 0]))])
    km = (wps - wps[0]) * scale
    seg = np.linalg.norm(np.diff(km, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    pos, out = 0.0, []
    while True:
        s = min(pos, cum[-1])
        i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg) - 1)
        frac = 0.0 if seg[i] == 0 else (s - cum[i]) / seg[i]
        p = km[i] + frac * (km[i + 1] - km[i]) + rng.normal(0, noise_km, 2)
        out.append(p)
        if pos >= cum[-1]:
            break
        pos += max(speed_kmh * rng.uniform(0.6, 1.4), 3.0) * SAMPLING_S / 3600.0
    return np.asarray(out) / scale + wps[0]


def synthetic_corpus(n_trips: int = 2000, cutoffs=(), ongoing_frac: float = 0.25,
                     seed: int = 0, start_range=(1404172800, 1420070400)) -> list:
    """A corpus of trips between stands/random origins and a few popular hubs.

    A fraction ``ongoing_frac`` of trips is placed so it is in progress at one
    of ``cutoffs``; the rest start uniformly in ``start_range``. Callers and
    stands have favourite destinations, so contextual matching carries signal.
    """
    rng = np.random.default_rng(seed)
    hubs = [offset(CENTER, n, e) for n, e in
            [(10.0, -4.2), (-0.8, 1.9), (2.5, 3.0), (-2.0, -3.5), (4.0, -1.0), (0.5, -2.0),
             (-3.0, 2.5), (1.5, 0.8)]]
    corridors = [offset(h, -0.35 * (h[0] - CENTER[0]) * KM_PER_DEG_LAT,
                        -0.35 * (h[1] - CENTER[1]) * KM_PER_DEG_LAT * 0.75) for h in hubs]
    stands = [offset(CENTER, rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5)) for _ in range(15)]
    stand_hub = rng.integers(0, len(hubs), len(stands))
    n_callers = 40
    caller_hub = rng.integers(0, len(hubs), n_callers)
    cutoffs = list(cutoffs)
    trips = []
    for k in range(n_trips):
        kind = rng.choice(["A", "B", "C"], p=[0.25, 0.45, 0.30])
        call = stand = None
        if kind == "A":
            call = int(rng.integers(0, n_callers))
            origin = offset(CENTER, rng.uniform(-3, 3), rng.uniform(-3, 3))
            hub = int(caller_hub[call]) if rng.random() < 0.7 else int(rng.integers(len(hubs)))
        elif kind == "B":
            stand = int(rng.integers(0, len(stands)))
            origin = offset(stands[stand], rng.normal(0, 0.05), rng.normal(0, 0.05))
            hub = int(stand_hub[stand]) if rng.random() < 0.6 else int(rng.integers(len(hubs)))
        else:
            origin = offset(CENTER, rng.uniform(-4, 4), rng.uniform(-4, 4))
            hub = int(rng.integers(len(hubs)))
        dest = offset(hubs[hub], rng.normal(0, 0.15), rng.normal(0, 0.15))
        route = [origin, corridors[hub], dest] if rng.random() < 0.8 else [origin, dest]
        pts = _walk(route, rng.uniform(18, 45), rng)
        if len(pts) > 8 and rng.random() < 0.05:
            cut = int(rng.integers(2, len(pts) - 6))
            pts = np.concatenate([pts[:cut], pts[cut + 6:]])
        if len(pts) < 2:
            pts = np.vstack([pts, pts[-1:]])
        duration = SAMPLING_S * (len(pts) - 1)
        if cutoffs and rng.random() < ongoing_frac:
            c = cutoffs[int(rng.integers(len(cutoffs)))]
            start = int(c - rng.integers(0, duration))
        else:
            start = int(rng.integers(*start_range))
        trips.append(RawTrip(
            trip_id=f"T{k:06d}", call_type=str(kind), origin_call=call,
            origin_stand=None if stand is None else stand + 1,
            taxi_id=int(20000000 + rng.integers(0, 60)), start_ts=start, day_type="A",
            missing_flag=False, polyline=np.round(pts, 6)))
    return trips
