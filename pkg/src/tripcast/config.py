"""Pipeline configuration read from a ``key = value`` text file."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, fields
from datetime import datetime
from zoneinfo import ZoneInfo

from .features import FeatureConfig
from .geo import GeoPoint

DEFAULT_CUTOFFS = ("2014-08-14 18:00:00", "2014-09-30 08:30:00", "2014-10-06 17:45:00",
                   "2014-11-01 04:00:00", "2014-12-21 14:30:00")


class ConfigError(ValueError):
    pass


def to_unix(stamp, tz: str) -> int:
    """Unix seconds for an integer or a local ``YYYY-mm-dd HH:MM:SS`` string."""
    if isinstance(stamp, int):
        return stamp
    text = str(stamp).strip()
    if text.lstrip("-").isdigit():
        return int(text)
    try:
        local = datetime.strptime(text, "%Y-%m-%d %H:%M:%S").replace(tzinfo=ZoneInfo(tz))
    except ValueError as exc:
        raise ConfigError(f"bad timestamp {text!r}: {exc}") from None
    return int(local.timestamp())


@dataclass
class PipelineConfig:
    seed: int = 0
    cutoffs: tuple = DEFAULT_CUTOFFS
    timezone: str = "Europe/Lisbon"
    precision: int = 6
    radius_km: float = 1.0
    exact_search: bool = False
    knn_k: int = 10
    bandwidths: tuple = (0.005, 0.05, 0.5)
    suffix_meters: tuple = (100, 200, 300, 400, 500, 700, 1000, 1200, 1500)
    rdp_epsilons: tuple = (1e-6, 5e-6, 5e-5)
    context_keys: tuple = ("call_id", "taxi_id", "day_of_week", "hour_of_day", "stand_id")
    derived_bandwidth: float = 0.05
    center_lat: float = 41.1579
    center_lon: float = -8.6291
    scale: str = "desk"
    tree_scale: float = 1.0
    dest_trees: int = 200
    dest_outlier_quantile: float = 0.9
    time_outlier_threshold: float = 3.5
    meta: str = "lasso"
    meta_alpha: float = 1e-3
    stack_holdout: float = 0.2
    dest_validation_frac: float = 0.34
    time_validation_frac: float = 0.2

    def cutoff_ts(self) -> list:
        return [to_unix(c, self.timezone) for c in self.cutoffs]

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(bandwidths=tuple(self.bandwidths),
                             suffix_meters=tuple(self.suffix_meters),
                             rdp_epsilons=tuple(self.rdp_epsilons),
                             context_keys=tuple(self.context_keys),
                             derived_bandwidth=self.derived_bandwidth, knn_k=self.knn_k,
                             center=GeoPoint(self.center_lat, self.center_lon))

    def as_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_string("[tripcast]\n" + fh.read())
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        defaults = cls()
        values = {}
        for key, raw in parser["tripcast"].items():
            if not hasattr(defaults, key):
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw, getattr(defaults, key))
        return cls(**values)


def _coerce(key, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], (int, float)):
                kind = type(default[0])
                return tuple(kind(float(s)) if kind is int else float(s) for s in items)
            return tuple(items)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw
