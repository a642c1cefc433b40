"""Great-circle distance, geohash cells and a geohash-backed trip index."""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, NamedTuple

import numpy as np

EARTH_RADIUS_KM = 6371.0
BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"
_DECODE = {c: i for i, c in enumerate(BASE32)}


class GeoPoint(NamedTuple):
    lat: float
    lon: float


def check_point(lat: float, lon: float) -> GeoPoint:
    lat, lon = float(lat), float(lon)
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError(f"non-finite coordinate ({lat}, {lon})")
    if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
        raise ValueError(f"coordinate out of range ({lat}, {lon})")
    return GeoPoint(lat, lon)


def haversine_km(p1, p2) -> float:
    """Great-circle distance in km between two (lat, lon) points in degrees."""
    lat1, lon1 = check_point(*p1)
    lat2, lon2 = check_point(*p2)
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    a = min(max(a, 0.0), 1.0)
    return 2 * EARTH_RADIUS_KM * math.atan2(math.sqrt(a), math.sqrt(1 - a))


def haversine_array(lat1, lon1, lat2, lon2):
    """Vectorised haversine in km; arguments broadcast like numpy arrays."""
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.subtract(lon2, lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2 * EARTH_RADIUS_KM * np.arctan2(np.sqrt(a), np.sqrt(1 - a))


def unit_vectors(points) -> np.ndarray:
    """(n, 3) unit vectors on the sphere for (lat, lon) degree pairs."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    phi = np.radians(pts[:, 0])
    lmb = np.radians(pts[:, 1])
    c = np.cos(phi)
    return np.column_stack([c * np.cos(lmb), c * np.sin(lmb), np.sin(phi)])


def chord_km(U, V):
    """Pairwise great-circle km between unit-vector sets U (m, 3) and V (n, 3).

    Same value as the haversine formula: its ``a`` term equals a quarter of
    the squared chord length.
    """
    sq = np.subtract.outer(U[:, 0], V[:, 0])
    sq *= sq
    for k in (1, 2):
        d = np.subtract.outer(U[:, k], V[:, k])
        d *= d
        sq += d
    np.sqrt(sq, out=sq)
    sq *= 0.5
    np.minimum(sq, 1.0, out=sq)
    np.arcsin(sq, out=sq)
    sq *= 2 * EARTH_RADIUS_KM
    return sq


def path_length_km(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return 0.0
    return float(haversine_array(pts[:-1, 0], pts[:-1, 1], pts[1:, 0], pts[1:, 1]).sum())


# -- geohash -----------------------------------------------------------------

def geohash_encode(lat: float, lon: float, precision: int = 6) -> str:
    """Encode a point as a base-32 geohash.

    Bits interleave longitude first. Cells are half-open with the lower
    edge inclusive, so a point on a split line goes to the upper cell.
    """
    if not isinstance(precision, (int, np.integer)) or not 1 <= precision <= 12:
        raise ValueError(f"precision must be an integer in [1, 12], got {precision!r}")
    lat, lon = check_point(lat, lon)
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    chars = []
    even = True
    bits = 0
    n_bits = 0
    while len(chars) < precision:
        if even:
            mid = (lon_lo + lon_hi) / 2
            if lon >= mid:
                bits = (bits << 1) | 1
                lon_lo = mid
            else:
                bits <<= 1
                lon_hi = mid
        else:
            mid = (lat_lo + lat_hi) / 2
            if lat >= mid:
                bits = (bits << 1) | 1
                lat_lo = mid
            else:
                bits <<= 1
                lat_hi = mid
        even = not even
        n_bits += 1
        if n_bits == 5:
            chars.append(BASE32[bits])
            bits = n_bits = 0
    return "".join(chars)


def geohash_bbox(code: str) -> tuple[float, float, float, float]:
    """Return (lat_lo, lat_hi, lon_lo, lon_hi) of a geohash cell."""
    if not code or len(code) > 12:
        raise ValueError(f"invalid geohash {code!r}")
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    even = True
    for c in code:
        try:
            v = _DECODE[c]
        except KeyError:
            raise ValueError(f"invalid geohash character {c!r} in {code!r}") from None
        for shift in range(4, -1, -1):
            bit = (v >> shift) & 1
            if even:
                mid = (lon_lo + lon_hi) / 2
                if bit:
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) / 2
                if bit:
                    lat_lo = mid
                else:
                    lat_hi = mid
            even = not even
    return lat_lo, lat_hi, lon_lo, lon_hi


def geohash_decode(code: str) -> GeoPoint:
    lat_lo, lat_hi, lon_lo, lon_hi = geohash_bbox(code)
    return GeoPoint((lat_lo + lat_hi) / 2, (lon_lo + lon_hi) / 2)


def geohash_neighbors(code: str) -> set[str]:
    """The cell itself plus its (up to) 8 neighbours at the same precision.

    Longitude wraps across the antimeridian; rows beyond a pole are dropped.
    """
    lat_lo, lat_hi, lon_lo, lon_hi = geohash_bbox(code)
    dlat = lat_hi - lat_lo
    dlon = lon_hi - lon_lo
    clat = (lat_lo + lat_hi) / 2
    clon = (lon_lo + lon_hi) / 2
    out = set()
    for i in (-1, 0, 1):
        lat = clat + i * dlat
        if not -90.0 < lat < 90.0:
            continue
        for j in (-1, 0, 1):
            lon = clon + j * dlon
            lon = (lon + 180.0) % 360.0 - 180.0
            out.add(geohash_encode(lat, lon, len(code)))
    return out


class SpatialIndex:
    """Geohash cell -> trip ids, built once and read-only afterwards.

    Range queries return every trip registered in the 3x3 block of cells
    around the query point. That is an approximation of a radius search:
    at precision 6 the block covers at least ~0.6 km in every direction,
    and trips further away can still be returned.
    """

    def __init__(self, precision: int = 6):
        if not 1 <= precision <= 12:
            raise ValueError(f"precision must be in [1, 12], got {precision}")
        self.precision = precision
        self.cells: dict[str, frozenset] = {}
        self.n_trips = 0
        self.n_skipped = 0

    @classmethod
    def build(cls, trips: Iterable, precision: int = 6) -> "SpatialIndex":
        """Index trips given as objects with ``trip_id`` and ``polyline``."""
        idx = cls(precision)
        cells: dict[str, set] = defaultdict(set)
        seen = set()
        for trip in trips:
            pts = np.asarray(trip.polyline, dtype=float).reshape(-1, 2)
            if len(pts) == 0:
                idx.n_skipped += 1
                continue
            seen.add(trip.trip_id)
            for lat, lon in pts:
                cells[geohash_encode(lat, lon, precision)].add(trip.trip_id)
        idx.cells = {k: frozenset(v) for k, v in cells.items()}
        idx.n_trips = len(seen)
        return idx

    def __len__(self):
        return self.n_trips

    def cell_members(self, code: str) -> frozenset:
        return self.cells.get(code, frozenset())

    def range_query(self, center, radius_km: float = 1.0) -> set:
        if radius_km <= 0:
            raise ValueError("radius_km must be positive")
        code = geohash_encode(center[0], center[1], self.precision)
        out: set = set()
        for cell in geohash_neighbors(code):
            out.update(self.cells.get(cell, ()))
        return out


def index_build(trips, precision: int = 6) -> SpatialIndex:
    return SpatialIndex.build(trips, precision)


def index_range_query(idx: SpatialIndex, center, radius_km: float = 1.0) -> set:
    return idx.range_query(center, radius_km)
