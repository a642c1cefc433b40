"""Feature vectors for destination and travel-time prediction, and snapshot datasets."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Sequence
from zoneinfo import ZoneInfo

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .geo import GeoPoint
from .matching import (DEFAULT_TZ, KernelRegressionSpec, MatchSet, NoCandidatesError,
                       TripDistanceSpec, TripMatcher)
from .trajectory import (CITY_CENTER, SAMPLING_S, SPEED_LIMITS_KMH, SPEED_WINDOWS_M,
                         PartialTrip, RawTrip, compute_kinematics, segment_km,
                         truncate_at_cutoff)

TASKS = ("destination", "travel_time")
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FeatureConfig:
    """Which matching features to compute.

    Distances are in km, so bandwidths are km as well. ``derived_bandwidth``
    is the single bandwidth used by the suffix, simplified and contextual
    kernel regressions.
    """

    bandwidths: tuple = (0.005, 0.05, 0.5)
    suffix_meters: tuple = (100, 200, 300, 400, 500, 700, 1000, 1200, 1500)
    rdp_epsilons: tuple = (1e-6, 5e-6, 5e-5)
    context_keys: tuple = ("call_id", "taxi_id", "day_of_week", "hour_of_day", "stand_id")
    derived_bandwidth: float = 0.05
    knn_k: int = 10
    speed_windows_m: tuple = SPEED_WINDOWS_M
    speed_limits_kmh: tuple = SPEED_LIMITS_KMH
    center: GeoPoint = CITY_CENTER
    traffic_window_s: int = 3600

    def __post_init__(self):
        if self.knn_k < 1:
            raise ValueError("knn_k must be >= 1")
        self.kr_specs("destination")  # validates every spec

    def kr_specs(self, target: str) -> list:
        full = TripDistanceSpec("best_match")
        h = self.derived_bandwidth
        specs = [KernelRegressionSpec(b, full, "none", target) for b in self.bandwidths]
        specs += [KernelRegressionSpec(h, TripDistanceSpec("suffix", d_meters=float(d)),
                                       "none", target) for d in self.suffix_meters]
        specs += [KernelRegressionSpec(h, TripDistanceSpec("best_match", epsilon=float(e)),
                                       "none", target) for e in self.rdp_epsilons]
        specs += [KernelRegressionSpec(h, full, key, target) for key in self.context_keys]
        return specs

    def distance_specs(self) -> list:
        seen = {TripDistanceSpec("aligned_prefix"): None}
        for s in self.kr_specs("destination"):
            seen.setdefault(s.distance, None)
        return list(seen)


@dataclass(frozen=True)
class FeatureSchema:
    task: str
    names: tuple

    @property
    def width(self) -> int:
        return len(self.names)

    @property
    def schema_id(self) -> str:
        digest = hashlib.sha1("\n".join(self.names).encode()).hexdigest()[:10]
        return f"{self.task}-v{SCHEMA_VERSION}-w{self.width}-{digest}"


def destination_schema(cfg: FeatureConfig = FeatureConfig()) -> FeatureSchema:
    names = []
    for i in range(cfg.knn_k):
        names += [f"knn{i}_lat", f"knn{i}_lon", f"knn{i}_dist_km"]
    names.append("knn_found")
    for spec in cfg.kr_specs("destination"):
        names += [f"{spec.name}_lat", f"{spec.name}_lon"]
    names.append("kr_fallbacks")
    names += ["traveled_km", "first_last_km", "toward_center", "elapsed_s", "n_points",
              "day_of_week", "first_lat", "first_lon", "last_lat", "last_lon"]
    return FeatureSchema("destination", tuple(names))


def time_schema(cfg: FeatureConfig = FeatureConfig()) -> FeatureSchema:
    names = [f"knn{i}_time_s" for i in range(cfg.knn_k)]
    names += [f"knn{i}_dist_km" for i in range(cfg.knn_k)]
    names.append("knn_found")
    names += [f"{spec.name}_time_s" for spec in cfg.kr_specs("travel_time")]
    names.append("kr_fallbacks")
    names += [f"speed_last{d}m" for d in cfg.speed_windows_m] + ["speed_overall"]
    names += [f"accel_last{d}m" for d in cfg.speed_windows_m] + ["accel_overall"]
    names += ["shape_complexity", "traffic_speed", "traffic_fallback"]
    names += [f"missing_v{v}" for v in cfg.speed_limits_kmh]
    # first_last_km is recoverable as traveled_km / shape_complexity
    names += ["elapsed_s", "n_points", "traveled_km", "toward_center", "day_of_week"]
    return FeatureSchema("travel_time", tuple(names))


def schema_for(task: str, cfg: FeatureConfig = FeatureConfig()) -> FeatureSchema:
    if task == "destination":
        return destination_schema(cfg)
    if task == "travel_time":
        return time_schema(cfg)
    raise ValueError(f"unknown task {task!r}")


def _day_of_week(ts: int, tz: ZoneInfo) -> int:
    return datetime.fromtimestamp(ts, tz).weekday()


def _match(pt, cfg, matcher, exclude, ms):
    if ms is None:
        ms = matcher.match(pt, cfg.distance_specs(), exclude=exclude)
    return ms


def _kr_block(ms: MatchSet, matcher: TripMatcher, specs, fallback):
    values, n_fallback = [], 0
    for spec in specs:
        try:
            pred, _ = matcher.kr_from(ms, spec)
        except NoCandidatesError:
            pred = fallback
            n_fallback += 1
        values.append(np.atleast_1d(np.asarray(pred, dtype=float)))
    return values, n_fallback


def build_destination_features(pt: PartialTrip, cfg: FeatureConfig, matcher: TripMatcher,
                               exclude=None, match_set: Optional[MatchSet] = None) -> np.ndarray:
    """One destination feature row in :func:`destination_schema` order.

    Missing neighbours are zero-filled and counted by ``knn_found``; kernel
    regressions without any comparable candidate fall back to the query's
    last point and are counted by ``kr_fallbacks``.
    """
    pts = np.asarray(pt.points, dtype=float)
    if len(pts) == 0:
        raise ValueError("partial trip has no points")
    ms = _match(pt, cfg, matcher, exclude, match_set)
    row = []
    nbrs = matcher.knn_from(ms, cfg.knn_k, "destination")
    for i in range(cfg.knn_k):
        if i < len(nbrs):
            row += [nbrs[i].target[0], nbrs[i].target[1], nbrs[i].distance_km]
        else:
            row += [0.0, 0.0, 0.0]
    row.append(len(nbrs))
    kr, n_fb = _kr_block(ms, matcher, cfg.kr_specs("destination"), pts[-1])
    for v in kr:
        row += list(v)
    row.append(n_fb)
    kin = compute_kinematics(pts, cfg.center, cfg.speed_windows_m, cfg.speed_limits_kmh)
    row += [kin.traveled_km, kin.first_last_km, float(kin.toward_center), pt.elapsed_s,
            len(pts), _day_of_week(pt.base.start_ts, matcher.tz),
            pts[0, 0], pts[0, 1], pts[-1, 0], pts[-1, 1]]
    return np.asarray(row, dtype=float)


def overall_speed_kmh(points) -> Optional[float]:
    seg = segment_km(points)
    if len(seg) == 0:
        return None
    return float(seg.sum() / (SAMPLING_S * len(seg)) * 3600.0)


def concurrent_trips(pt: PartialTrip, batch: Sequence[PartialTrip], window_s: int = 3600):
    """Other partial trips that started within ``window_s`` of ``pt``'s cut-off."""
    return [o for o in batch
            if o.trip_id != pt.trip_id and abs(o.base.start_ts - pt.cutoff_ts) <= window_s]


def build_time_features(pt: PartialTrip, cfg: FeatureConfig, matcher: TripMatcher,
                        concurrent: Sequence[PartialTrip] = (), exclude=None,
                        match_set: Optional[MatchSet] = None) -> np.ndarray:
    """One travel-time feature row in :func:`time_schema` order.

    ``concurrent`` supplies the traffic-speed feature (mean overall speed of
    concurrent trips with at least two points). Without any, the query's own
    overall speed is used and ``traffic_fallback`` is set.
    """
    pts = np.asarray(pt.points, dtype=float)
    if len(pts) == 0:
        raise ValueError("partial trip has no points")
    ms = _match(pt, cfg, matcher, exclude, match_set)
    nbrs = matcher.knn_from(ms, cfg.knn_k, "travel_time")
    times = [n.target for n in nbrs] + [0.0] * (cfg.knn_k - len(nbrs))
    dists = [n.distance_km for n in nbrs] + [0.0] * (cfg.knn_k - len(nbrs))
    row = times + dists + [len(nbrs)]
    kr, n_fb = _kr_block(ms, matcher, cfg.kr_specs("travel_time"), float(pt.observed_s))
    row += [float(v[0]) for v in kr] + [n_fb]
    kin = compute_kinematics(pts, cfg.center, cfg.speed_windows_m, cfg.speed_limits_kmh)
    row += [kin.speeds_last_d[d] for d in cfg.speed_windows_m] + [kin.overall_speed]
    row += [kin.accel_last_d[d] for d in cfg.speed_windows_m] + [kin.overall_accel]
    speeds = [s for s in (overall_speed_kmh(o.points) for o in concurrent) if s is not None]
    if speeds:
        traffic, fb = float(np.mean(speeds)), 0.0
    else:
        traffic, fb = kin.overall_speed, 1.0
    row += [kin.shape_complexity, traffic, fb]
    row += [float(kin.missing_by_vhat[v]) for v in cfg.speed_limits_kmh]
    row += [pt.elapsed_s, len(pts), kin.traveled_km, float(kin.toward_center),
            _day_of_week(pt.base.start_ts, matcher.tz)]
    return np.asarray(row, dtype=float)


class TripFeaturizer(TransformerMixin, BaseEstimator):
    """Turns partial trips into feature rows by matching them to a corpus.

    ``fit`` takes the historical (complete) trips and builds the matcher;
    ``transform`` takes a list of :class:`PartialTrip` and returns an array
    of shape (n_trips, schema width). With ``exclude_self`` a query never
    matches the corpus trip that has its own id.
    """

    def __init__(self, task="destination", config=None, precision=6, radius_km=1.0,
                 exact=False, exclude_self=False, tz=DEFAULT_TZ):
        self.task = task
        self.config = config
        self.precision = precision
        self.radius_km = radius_km
        self.exact = exact
        self.exclude_self = exclude_self
        self.tz = tz

    @property
    def config_(self) -> FeatureConfig:
        return self.config if self.config is not None else FeatureConfig()

    def fit(self, corpus, y=None):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        self.matcher_ = TripMatcher(corpus, precision=self.precision, radius_km=self.radius_km,
                                    exact=self.exact, tz=self.tz)
        self.schema_ = schema_for(self.task, self.config_)
        return self

    def transform(self, trips):
        check_is_fitted(self, "matcher_")
        cfg = self.config_
        rows = []
        for pt in trips:
            exclude = pt.trip_id if self.exclude_self else None
            if self.task == "destination":
                rows.append(build_destination_features(pt, cfg, self.matcher_, exclude))
            else:
                conc = concurrent_trips(pt, trips, cfg.traffic_window_s)
                rows.append(build_time_features(pt, cfg, self.matcher_, conc, exclude))
        if not rows:
            return np.empty((0, self.schema_.width))
        X = np.vstack(rows)
        if not np.isfinite(X).all():
            raise ValueError("feature assembly produced non-finite values")
        return X

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "schema_")
        return np.array(self.schema_.names, dtype=object)


@dataclass
class SnapshotDataset:
    """Feature rows for trips ongoing at a set of cut-off timestamps.

    ``y`` holds (lat, lon) destinations for the destination task and remaining
    seconds for the travel-time task. ``total_s`` is the full trip duration.
    """

    task: str
    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    trip_ids: list
    cutoffs: np.ndarray
    observed_s: np.ndarray
    total_s: np.ndarray
    n_skipped: int = 0
    cutoff_list: list = field(default_factory=list)

    def __len__(self):
        return len(self.trip_ids)

    @property
    def row_ids(self) -> list:
        return [f"{t}@{c}" for t, c in zip(self.trip_ids, self.cutoffs)]

    def subset(self, mask) -> "SnapshotDataset":
        idx = np.flatnonzero(mask) if np.asarray(mask).dtype == bool else np.asarray(mask)
        return SnapshotDataset(self.task, self.schema, self.X[idx], self.y[idx],
                               [self.trip_ids[i] for i in idx], self.cutoffs[idx],
                               self.observed_s[idx], self.total_s[idx], self.n_skipped,
                               list(self.cutoff_list))

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.schema.names.index(name)]


def snapshot_trips(corpus: Sequence[RawTrip], cutoff: int):
    """Ongoing trips at ``cutoff`` ordered by trip id, and the count of those
    skipped for having fewer than two observed points."""
    kept, skipped = [], 0
    for trip in sorted(corpus, key=lambda t: t.trip_id):
        pt = truncate_at_cutoff(trip, cutoff)
        if pt is None:
            continue
        if pt.n_points < 2:
            skipped += 1
            continue
        kept.append(pt)
    return kept, skipped


def build_snapshot_dataset(corpus: Sequence[RawTrip], cutoffs: Sequence[int], task: str,
                           cfg: FeatureConfig = FeatureConfig(),
                           matcher: Optional[TripMatcher] = None,
                           progress=None) -> SnapshotDataset:
    """Rows for every trip ongoing at each cut-off, matched leave-self-out."""
    if not cutoffs:
        raise ValueError("at least one cut-off is required")
    schema = schema_for(task, cfg)
    if matcher is None:
        matcher = TripMatcher(corpus)
    rows, ys, ids, cuts, obs, tot = [], [], [], [], [], []
    n_skipped = 0
    for cutoff in cutoffs:
        batch, skipped = snapshot_trips(corpus, int(cutoff))
        n_skipped += skipped
        for pt in batch:
            full = pt.base
            if task == "destination":
                rows.append(build_destination_features(pt, cfg, matcher, exclude=pt.trip_id))
                ys.append(full.polyline[-1])
            else:
                conc = concurrent_trips(pt, batch, cfg.traffic_window_s)
                rows.append(build_time_features(pt, cfg, matcher, conc, exclude=pt.trip_id))
                ys.append(SAMPLING_S * (full.n_points - 1) - pt.observed_s)
            ids.append(pt.trip_id)
            cuts.append(int(cutoff))
            obs.append(pt.observed_s)
            tot.append(SAMPLING_S * (full.n_points - 1))
            if progress is not None:
                progress(len(rows))
    X = np.vstack(rows) if rows else np.empty((0, schema.width))
    if task == "destination":
        y = np.asarray(ys, dtype=float).reshape(-1, 2)
    else:
        y = np.asarray(ys, dtype=float)
        if (y <= 0).any():
            raise AssertionError("remaining travel time must be positive")
    if not np.isfinite(X).all():
        raise ValueError("feature assembly produced non-finite values")
    return SnapshotDataset(task, schema, X, y, ids, np.asarray(cuts, dtype=np.int64),
                           np.asarray(obs, dtype=float), np.asarray(tot, dtype=float),
                           n_skipped, [int(c) for c in cutoffs])


def modified_zscores(values) -> np.ndarray:
    """``0.6745 |x - median| / MAD``.

    When the MAD is zero the mean absolute deviation is used instead
    (``|x - median| / (1.253314 * meanAD)``); when that is zero too every
    score is zero.
    """
    t = np.asarray(values, dtype=float)
    med = np.median(t)
    dev = np.abs(t - med)
    mad = np.median(dev)
    if mad > 0:
        return 0.6745 * dev / mad
    mean_ad = dev.mean()
    if mean_ad > 0:
        return dev / (1.253314 * mean_ad)
    return np.zeros_like(t)


def filter_time_outliers(ds: SnapshotDataset, threshold: float = 3.5) -> SnapshotDataset:
    """Drop rows whose total trip time is a modified z-score outlier."""
    if ds.task != "travel_time":
        raise ValueError("outlier filtering applies to travel-time datasets")
    if len(ds) < 3:
        return ds
    return ds.subset(modified_zscores(ds.total_s) <= threshold)


# -- delimited export ----------------------------------------------------------

def _target_columns(task: str) -> list:
    return ["target_lat", "target_lon"] if task == "destination" else ["target_remaining_s"]


def write_dataset(ds: SnapshotDataset, path) -> None:
    """Write a dataset as CSV: a ``#`` metadata line, a header, one row per trip.

    Floats are written with ``repr`` so reading back is exact.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#schema_id={ds.schema.schema_id};task={ds.task};skipped={ds.n_skipped};"
                 f"cutoffs={','.join(str(c) for c in ds.cutoff_list)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_id", "trip_id", "cutoff_ts", "observed_s", "total_s"]
                   + _target_columns(ds.task) + list(ds.schema.names))
        y2 = ds.y.reshape(len(ds), -1)
        for i in range(len(ds)):
            w.writerow([ds.row_ids[i], ds.trip_ids[i], int(ds.cutoffs[i]),
                        repr(float(ds.observed_s[i])), repr(float(ds.total_s[i]))]
                       + [repr(float(v)) for v in y2[i]]
                       + [repr(float(v)) for v in ds.X[i]])


class DatasetFormatError(ValueError):
    pass


def read_dataset(path) -> SnapshotDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        meta_line = fh.readline()
        if not meta_line.startswith("#"):
            raise DatasetFormatError(f"{path}: missing metadata line")
        meta = dict(kv.split("=", 1) for kv in meta_line[1:].strip().split(";"))
        task = meta.get("task")
        if task not in TASKS:
            raise DatasetFormatError(f"{path}: unknown task {task!r}")
        reader = csv.reader(fh)
        header = next(reader, None)
        tcols = _target_columns(task)
        fixed = ["row_id", "trip_id", "cutoff_ts", "observed_s", "total_s"] + tcols
        if header is None or header[: len(fixed)] != fixed:
            raise DatasetFormatError(f"{path}: malformed header")
        schema = FeatureSchema(task, tuple(header[len(fixed):]))
        if schema.schema_id != meta.get("schema_id"):
            raise DatasetFormatError(f"{path}: header does not match schema id")
        ids, cuts, obs, tot, ys, rows = [], [], [], [], [], []
        for rec in reader:
            if len(rec) != len(header):
                raise DatasetFormatError(f"{path}: row {rec[:1]} has {len(rec)} fields")
            ids.append(rec[1])
            cuts.append(int(rec[2]))
            obs.append(float(rec[3]))
            tot.append(float(rec[4]))
            ys.append([float(v) for v in rec[5:5 + len(tcols)]])
            rows.append([float(v) for v in rec[len(fixed):]])
    y = np.asarray(ys, dtype=float).reshape(-1, len(tcols))
    if task == "travel_time":
        y = y[:, 0]
    cutoffs = [int(c) for c in meta.get("cutoffs", "").split(",") if c]
    return SnapshotDataset(task, schema,
                           np.asarray(rows, dtype=float).reshape(-1, schema.width), y, ids,
                           np.asarray(cuts, dtype=np.int64), np.asarray(obs, dtype=float),
                           np.asarray(tot, dtype=float), int(meta.get("skipped", 0)), cutoffs)
