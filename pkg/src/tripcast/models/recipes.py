"""Task-level training recipes: destination forests and the travel-time ensemble."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ..geo import haversine_array
from ._validation import check_X, check_X_y
from .boosting import GradientBoostingRegressor
from .forest import ExtraTreesRegressor, RandomForestRegressor
from .stacking import StackingEnsemble

PAPER_TREES = {"rf": 2500, "ert": 1000, "ert_long": 3000, "destination": 2000}
DESK_TREES = {"rf": 200, "ert": 100, "ert_long": 300, "destination": 200}
GBRT_STAGES = 128

_GBRT_BASE = dict(learning_rate=0.1, max_depth=3, max_features=None,
                  min_samples_leaf=3, min_samples_split=3)
_GBRT_GRID = [
    ("GBRT-01", "squared_loss", 1.0, 0.9),
    ("GBRT-02", "squared_loss", 0.8, 0.9),
    ("GBRT-03", "least_absolute_deviation", 1.0, 0.9),
    ("GBRT-04", "least_absolute_deviation", 0.8, 0.9),
    ("GBRT-05", "huber", 1.0, 0.9),
    ("GBRT-06", "huber", 0.8, 0.9),
    ("GBRT-07", "huber", 1.0, 0.5),
    ("GBRT-08", "huber", 0.8, 0.5),
    ("GBRT-09", "quantile", 1.0, 0.5),
    ("GBRT-10", "quantile", 0.8, 0.5),
]
# name, max_features, min_samples_leaf, min_samples_split, out-of-bag
_RF_GRID = [
    ("RF-01", None, 4, 2, False),
    ("RF-02", None, 1, 1, False),
    ("RF-03", "sqrt", 4, 2, False),
    ("RF-04", "log2", 4, 2, False),
    ("RF-05", None, 1, 1, True),
    ("RF-06", "sqrt", 4, 2, True),
    ("RF-07", "log2", 4, 2, True),
]
# name, min_samples_split, out-of-bag, long run
_ERT_GRID = [
    ("ERT-01", 1, False, False),
    ("ERT-02", 2, False, False),
    ("ERT-03", 2, True, False),
    ("ERT-04", 1, True, True),
]


def _scaled(n: int, scale: float) -> int:
    return max(1, int(round(n * scale)))


def table1_zoo(scale: str = "desk", tree_scale: float = 1.0, random_state: int = 0):
    """The 21 base regressors of the travel-time ensemble.

    ``scale`` picks desk or paper tree counts; ``tree_scale`` multiplies every
    tree/stage count (useful for quick runs).
    """
    counts = DESK_TREES if scale == "desk" else PAPER_TREES
    if scale not in ("desk", "paper"):
        raise ValueError(f"unknown scale {scale!r}")
    zoo = []
    seed = random_state
    for name, loss, sub, alpha in _GBRT_GRID:
        zoo.append((name, GradientBoostingRegressor(
            loss=loss, subsample=sub, alpha=alpha,
            n_estimators=_scaled(GBRT_STAGES, tree_scale), random_state=seed, **_GBRT_BASE)))
        seed += 1
    for name, mf, leaf, split, oob in _RF_GRID:
        zoo.append((name, RandomForestRegressor(
            n_estimators=_scaled(counts["rf"], tree_scale), max_depth=None, max_features=mf,
            min_samples_leaf=leaf, min_samples_split=split, oob_score=oob, random_state=seed)))
        seed += 1
    for name, split, oob, long in _ERT_GRID:
        n = counts["ert_long"] if long else counts["ert"]
        zoo.append((name, ExtraTreesRegressor(
            n_estimators=_scaled(n, tree_scale), max_depth=None, max_features=None,
            min_samples_leaf=1, min_samples_split=split, bootstrap=oob, oob_score=oob,
            random_state=seed)))
        seed += 1
    return zoo


def quantile_keep_mask(errors, q: float = 0.9) -> np.ndarray:
    """Rows whose error is at most the ``q`` quantile (ties are kept)."""
    errors = np.asarray(errors, dtype=float)
    return errors <= np.quantile(errors, q)


class DestinationPredictor(RegressorMixin, BaseEstimator):
    """Independent random forests for latitude and longitude with one
    outlier-removal pass.

    The first pair of forests is scored in-sample by haversine error; rows
    above the ``outlier_quantile`` error quantile are dropped and the forests
    are refitted on the rest. Datasets under ``min_rows_for_outliers`` rows
    skip the pass.

    ``max_features`` defaults to a third of the features and
    ``min_samples_leaf`` to 5, the usual regression-forest defaults.
    """

    def __init__(self, n_estimators=DESK_TREES["destination"], max_features=1 / 3,
                 min_samples_leaf=5, max_depth=None, outlier_quantile=0.9,
                 min_rows_for_outliers=10, random_state=0):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.outlier_quantile = outlier_quantile
        self.min_rows_for_outliers = min_rows_for_outliers
        self.random_state = random_state

    def _forest(self, seed):
        return RandomForestRegressor(n_estimators=self.n_estimators,
                                     max_features=self.max_features,
                                     min_samples_leaf=self.min_samples_leaf,
                                     max_depth=self.max_depth, random_state=seed)

    def _fit_pair(self, X, Y):
        lat = self._forest(self.random_state).fit(X, Y[:, 0])
        lon = self._forest(self.random_state + 1).fit(X, Y[:, 1])
        return lat, lon

    def fit(self, X, Y):
        X, Y = check_X_y(X, Y, multi_output=True)
        Y = Y.reshape(len(Y), -1)
        if Y.shape[1] != 2:
            raise ValueError("destination targets must be (lat, lon) pairs")
        self.n_features_in_ = X.shape[1]
        lat, lon = self._fit_pair(X, Y)
        keep = np.ones(len(Y), dtype=bool)
        if len(Y) >= self.min_rows_for_outliers:
            err = haversine_array(lat.predict(X), lon.predict(X), Y[:, 0], Y[:, 1])
            self.train_errors_ = err
            keep = quantile_keep_mask(err, self.outlier_quantile)
            lat, lon = self._fit_pair(X[keep], Y[keep])
        self.kept_mask_ = keep
        self.n_removed_ = int((~keep).sum())
        self.lat_model_, self.lon_model_ = lat, lon
        imp = (lat.feature_importances_ + lon.feature_importances_) / 2
        self.feature_importances_ = imp
        return self

    def predict(self, X):
        check_is_fitted(self, "lat_model_")
        X = check_X(X, self.n_features_in_)
        return np.column_stack([self.lat_model_.predict(X), self.lon_model_.predict(X)])


class TravelTimeEnsemble(RegressorMixin, BaseEstimator):
    """Stacked ensemble that predicts remaining trip time in seconds.

    Targets are modelled as ``log(1 + remaining)``; ``predict`` maps back to
    seconds, and :meth:`predict_total` adds the already observed time.
    ``estimators=None`` uses :func:`table1_zoo`.
    """

    def __init__(self, estimators=None, meta="lasso", meta_alpha=1e-3, holdout=0.2,
                 scale="desk", tree_scale=1.0, random_state=0):
        self.estimators = estimators
        self.meta = meta
        self.meta_alpha = meta_alpha
        self.holdout = holdout
        self.scale = scale
        self.tree_scale = tree_scale
        self.random_state = random_state

    def fit(self, X, remaining_s):
        X, y = check_X_y(X, remaining_s)
        if (y <= 0).any():
            raise ValueError("remaining travel times must be positive")
        zoo = self.estimators
        if zoo is None:
            zoo = table1_zoo(self.scale, self.tree_scale, self.random_state)
        half = self.holdout / 2
        self.stack_ = StackingEnsemble(zoo, meta=self.meta, meta_alpha=self.meta_alpha,
                                       val_frac=half, test_frac=half,
                                       random_state=self.random_state).fit(X, np.log1p(y))
        self.n_features_in_ = X.shape[1]
        self.local_test_report_ = self.stack_.local_test_report_
        return self

    def predict(self, X):
        check_is_fitted(self, "stack_")
        return np.maximum(np.expm1(self.stack_.predict(X)), 0.0)

    def predict_total(self, X, observed_s):
        return np.asarray(observed_s, dtype=float) + self.predict(X)

    @property
    def feature_importances_(self):
        check_is_fitted(self, "stack_")
        imps = [m.feature_importances_ for m in self.stack_.estimators_
                if hasattr(m, "feature_importances_")]
        imp = np.mean(imps, axis=0)
        return imp / imp.sum() if imp.sum() > 0 else imp


def gps_count_mask(n_points, low: int = 2, high: int = 612) -> np.ndarray:
    """Row filter used for the sub-ensemble trained on typical trip lengths."""
    n = np.asarray(n_points)
    return (n >= low) & (n <= high)


def average_predictions(*predictions) -> np.ndarray:
    """Mean of several ensembles' predictions (composite ensembles)."""
    return np.mean(np.column_stack(predictions), axis=1)
