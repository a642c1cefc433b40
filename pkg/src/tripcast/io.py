"""Reading trip corpora and writing prediction files."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .trajectory import (SPEED_LIMITS_KMH, PolylineError, RawTrip, detect_missing_updates,
                         format_polyline, parse_polyline)

log = logging.getLogger(__name__)

CORPUS_COLUMNS = ["TRIP_ID", "CALL_TYPE", "ORIGIN_CALL", "ORIGIN_STAND", "TAXI_ID",
                  "TIMESTAMP", "DAY_TYPE", "MISSING_DATA", "POLYLINE"]


class CorpusFormatError(ValueError):
    pass


@dataclass
class QualityReport:
    n_rows: int = 0
    n_trips: int = 0
    empty_polylines: int = 0
    single_point: int = 0
    parse_failures: int = 0
    source_missing_flag: int = 0
    missing_by_vhat: dict = field(default_factory=lambda: {v: 0 for v in SPEED_LIMITS_KMH})
    errors: list = field(default_factory=list)

    @property
    def trainable(self) -> int:
        return self.n_trips - self.empty_polylines - self.single_point

    def as_dict(self) -> dict:
        return {
            "rows": self.n_rows,
            "trips": self.n_trips,
            "trainable_trips": self.trainable,
            "empty_polylines": self.empty_polylines,
            "single_point_trips": self.single_point,
            "parse_failures": self.parse_failures,
            "source_missing_flag_true_untrusted": self.source_missing_flag,
            "missing_updates_by_speed_limit": {str(k): v for k, v in self.missing_by_vhat.items()},
        }


def _opt_int(text: str):
    text = text.strip()
    if text in ("", "NA", "nan", "None"):
        return None
    return int(float(text))


def _parse_bool(text: str) -> bool:
    return text.strip().lower() in ("true", "1", "yes")


def ingest_corpus(path, limit=None):
    """Parse a trip CSV. Rows that fail to parse are counted and skipped.

    Returns ``(trips, report)``; trips keep their original order. Trips with an
    empty polyline are returned too (they are excluded when training).
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CorpusFormatError(f"cannot read {path}: {exc}") from None
    trips, report = [], QualityReport()
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().upper() for h in header] != CORPUS_COLUMNS:
            raise CorpusFormatError(f"{path}: expected header {','.join(CORPUS_COLUMNS)}")
        for lineno, rec in enumerate(reader, start=2):
            if limit is not None and report.n_rows >= limit:
                break
            report.n_rows += 1
            try:
                if len(rec) != len(CORPUS_COLUMNS):
                    raise CorpusFormatError(f"line {lineno}: expected 9 fields, got {len(rec)}")
                poly = parse_polyline(rec[8], row_id=rec[0])
                trip = RawTrip(trip_id=rec[0], call_type=rec[1].strip(),
                               origin_call=_opt_int(rec[2]), origin_stand=_opt_int(rec[3]),
                               taxi_id=int(float(rec[4])), start_ts=int(float(rec[5])),
                               day_type=rec[6].strip(), missing_flag=_parse_bool(rec[7]),
                               polyline=poly)
            except (PolylineError, CorpusFormatError, ValueError) as exc:
                report.parse_failures += 1
                if len(report.errors) < 20:
                    report.errors.append(str(exc))
                log.debug("skipping line %d: %s", lineno, exc)
                continue
            report.n_trips += 1
            report.source_missing_flag += trip.missing_flag
            if trip.n_points == 0:
                report.empty_polylines += 1
            elif trip.n_points == 1:
                report.single_point += 1
            else:
                for v in SPEED_LIMITS_KMH:
                    report.missing_by_vhat[v] += detect_missing_updates(trip.polyline, v)
            trips.append(trip)
    return trips, report


def _fmt_opt(v):
    return "" if v is None else str(v)


def write_corpus(trips, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CORPUS_COLUMNS)
        for t in trips:
            w.writerow([t.trip_id, t.call_type, _fmt_opt(t.origin_call), _fmt_opt(t.origin_stand),
                        t.taxi_id, t.start_ts, t.day_type, "True" if t.missing_flag else "False",
                        format_polyline(t.polyline)])


def round_half_up(x: float) -> int:
    return int(Decimal(repr(float(x))).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass
class PredictionRecord:
    trip_id: str
    destination: tuple | None = None
    travel_time_s: float | None = None


def emit_predictions(records, task: str, path) -> None:
    """Write a submission-style CSV sorted by trip id."""
    records = list(records)
    if not records:
        raise ValueError("no predictions to write")
    rows = sorted(records, key=lambda r: r.trip_id)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if task == "destination":
            w.writerow(["TRIP_ID", "LATITUDE", "LONGITUDE"])
            for r in rows:
                if r.destination is None:
                    raise ValueError(f"record {r.trip_id} lacks a destination")
                w.writerow([r.trip_id, repr(float(r.destination[0])), repr(float(r.destination[1]))])
        elif task == "travel_time":
            w.writerow(["TRIP_ID", "TRAVEL_TIME"])
            for r in rows:
                if r.travel_time_s is None or not np.isfinite(r.travel_time_s) \
                        or r.travel_time_s < 0:
                    raise ValueError(f"record {r.trip_id} lacks a valid travel time")
                w.writerow([r.trip_id, round_half_up(r.travel_time_s)])
        else:
            raise ValueError(f"unknown task {task!r}")


def read_predictions(path):
    """Read a prediction CSV back into ``(task, {trip_id: value})``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header == ["TRIP_ID", "LATITUDE", "LONGITUDE"]:
            return "destination", {r[0]: (float(r[1]), float(r[2])) for r in reader}
        if header == ["TRIP_ID", "TRAVEL_TIME"]:
            return "travel_time", {r[0]: float(r[1]) for r in reader}
    raise CorpusFormatError(f"{path}: not a prediction file")
