"""End-to-end glue: splitting, training, prediction and scoring for both tasks."""

from __future__ import annotations

import logging

import numpy as np

from .config import PipelineConfig
from .features import (SnapshotDataset, TripFeaturizer, filter_time_outliers, schema_for)
from .io import PredictionRecord
from .matching import TripMatcher
from .metrics import mhd_score, rmsle_score
from .models import DestinationPredictor, TravelTimeEnsemble
from .trajectory import as_partial

log = logging.getLogger(__name__)

TASK_ALIASES = {"dest": "destination", "destination": "destination",
                "time": "travel_time", "travel_time": "travel_time"}


def stratified_split(cutoffs, frac: float, seed: int = 0) -> np.ndarray:
    """Boolean validation mask holding ``frac`` of the rows of every cut-off."""
    cutoffs = np.asarray(cutoffs)
    rng = np.random.default_rng(seed)
    mask = np.zeros(len(cutoffs), dtype=bool)
    for c in np.unique(cutoffs):
        rows = np.flatnonzero(cutoffs == c)
        n_val = int(round(frac * len(rows)))
        mask[rng.permutation(rows)[:n_val]] = True
    return mask


def make_model(task: str, cfg: PipelineConfig):
    if task == "destination":
        n = cfg.dest_trees if cfg.scale == "desk" else 2000
        return DestinationPredictor(n_estimators=max(1, int(round(n * cfg.tree_scale))),
                                    outlier_quantile=cfg.dest_outlier_quantile,
                                    random_state=cfg.seed)
    return TravelTimeEnsemble(meta=cfg.meta, meta_alpha=cfg.meta_alpha,
                              holdout=cfg.stack_holdout, scale=cfg.scale,
                              tree_scale=cfg.tree_scale, random_state=cfg.seed)


def fit_task_model(ds: SnapshotDataset, cfg: PipelineConfig):
    """Fit the task's model on a dataset (time rows are outlier-filtered first)."""
    if ds.task == "travel_time":
        before = len(ds)
        ds = filter_time_outliers(ds, cfg.time_outlier_threshold)
        log.info("removed %d travel-time outliers", before - len(ds))
    model = make_model(ds.task, cfg)
    model.fit(ds.X, ds.y)
    return model


def train(ds: SnapshotDataset, cfg: PipelineConfig):
    """Split off a validation part stratified by cut-off and fit on the rest.

    Returns ``(model, validation_mask)``.
    """
    frac = cfg.dest_validation_frac if ds.task == "destination" else cfg.time_validation_frac
    val = stratified_split(ds.cutoffs, frac, cfg.seed)
    model = fit_task_model(ds.subset(~val), cfg)
    return model, val


def predict_dataset(model, ds: SnapshotDataset, mask=None) -> list:
    """Prediction records for dataset rows, keyed by row id."""
    sub = ds if mask is None else ds.subset(mask)
    if len(sub) == 0:
        return []
    ids = sub.row_ids
    if sub.task == "destination":
        P = model.predict(sub.X)
        return [PredictionRecord(i, destination=(float(p[0]), float(p[1])))
                for i, p in zip(ids, P)]
    totals = model.predict_total(sub.X, sub.observed_s)
    return [PredictionRecord(i, travel_time_s=float(t)) for i, t in zip(ids, totals)]


def predict_trips(model, task: str, corpus, trips, cfg: PipelineConfig) -> list:
    """Predictions for raw partial trips (each observed up to its last point)."""
    partials = [as_partial(t) for t in trips if t.n_points > 0]
    feat = TripFeaturizer(task=task, config=cfg.feature_config(), precision=cfg.precision,
                          radius_km=cfg.radius_km, exact=cfg.exact_search, tz=cfg.timezone)
    X = feat.fit(corpus).transform(partials)
    if task == "destination":
        P = model.predict(X)
        return [PredictionRecord(pt.trip_id, destination=(float(p[0]), float(p[1])))
                for pt, p in zip(partials, P)]
    observed = np.array([pt.observed_s for pt in partials], dtype=float)
    totals = model.predict_total(X, observed)
    return [PredictionRecord(pt.trip_id, travel_time_s=float(t))
            for pt, t in zip(partials, totals)]


def make_matcher(corpus, cfg: PipelineConfig) -> TripMatcher:
    return TripMatcher(corpus, precision=cfg.precision, radius_km=cfg.radius_km,
                       exact=cfg.exact_search, tz=cfg.timezone)


def score(task: str, predictions: dict, truth: dict) -> float:
    """MHD or RMSLE over the ids present in ``predictions``."""
    missing = [k for k in predictions if k not in truth]
    if missing:
        raise KeyError(f"{len(missing)} predicted ids have no ground truth, e.g. {missing[0]}")
    keys = sorted(predictions)
    p = [predictions[k] for k in keys]
    a = [truth[k] for k in keys]
    return mhd_score(p, a) if task == "destination" else rmsle_score(p, a)


def dataset_truth(ds: SnapshotDataset) -> dict:
    if ds.task == "destination":
        return {r: (float(y[0]), float(y[1])) for r, y in zip(ds.row_ids, ds.y)}
    return {r: float(t) for r, t in zip(ds.row_ids, ds.total_s)}


def expected_schema_id(task: str, cfg: PipelineConfig) -> str:
    return schema_for(task, cfg.feature_config()).schema_id
