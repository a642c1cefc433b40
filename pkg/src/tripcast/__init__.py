"""Destination and travel-time prediction for ongoing taxi trips by trip matching
and tree ensembles."""

from .features import (FeatureConfig, SnapshotDataset, TripFeaturizer, build_snapshot_dataset,
                       build_destination_features, build_time_features, filter_time_outliers)
from .geo import GeoPoint, SpatialIndex, geohash_encode, geohash_neighbors, haversine_km
from .matching import (KernelRegressionSpec, TripDistanceSpec, TripMatcher, kernel_regress,
                       knn_query)
from .metrics import mhd_score, rmsle_score
from .trajectory import PartialTrip, RawTrip, truncate_at_cutoff

__version__ = "0.1.0"

__all__ = [
    "FeatureConfig", "GeoPoint", "KernelRegressionSpec", "PartialTrip", "RawTrip",
    "SnapshotDataset", "SpatialIndex", "TripDistanceSpec", "TripFeaturizer", "TripMatcher",
    "build_destination_features", "build_snapshot_dataset", "build_time_features",
    "filter_time_outliers", "geohash_encode", "geohash_neighbors", "haversine_km",
    "kernel_regress", "knn_query", "mhd_score", "rmsle_score", "truncate_at_cutoff",
]
