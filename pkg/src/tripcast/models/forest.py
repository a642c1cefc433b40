"""Bagged tree ensembles: random forests and extremely randomised trees."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_X, check_X_y
from .tree import RegressionTree

_SEED_MAX = 2**31 - 1


def tree_seeds(random_state, n: int) -> list[int]:
    """Per-tree seeds derived from the master seed, independent of fit order."""
    ss = np.random.SeedSequence(random_state)
    return [int(s.generate_state(1)[0] % _SEED_MAX) for s in ss.spawn(n)]


class _BaseForest(RegressorMixin, BaseEstimator):
    _splitter = "best"

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.oob_score and not self.bootstrap:
            raise ValueError("out-of-bag estimates need bootstrap=True")
        n, p = X.shape
        self.n_features_in_ = p
        oob_sum = np.zeros(n)
        oob_cnt = np.zeros(n)
        self.estimators_ = []
        with warnings.catch_warnings():
            # warn once per forest, not once per tree
            if self.min_samples_split < 2:
                warnings.warn(f"min_samples_split={self.min_samples_split} cannot produce two "
                              "children; using 2", UserWarning, stacklevel=2)
            warnings.simplefilter("ignore", UserWarning)
            for seed in tree_seeds(self.random_state, self.n_estimators):
                tree = RegressionTree(max_depth=self.max_depth,
                                      min_samples_split=self.min_samples_split,
                                      min_samples_leaf=self.min_samples_leaf,
                                      max_features=self.max_features,
                                      splitter=self._splitter, random_state=seed)
                if self.bootstrap:
                    rows = np.random.default_rng(seed).integers(0, n, n)
                    tree.fit(X[rows], y[rows])
                    if self.oob_score:
                        out = np.ones(n, dtype=bool)
                        out[rows] = False
                        oob_sum[out] += tree.predict(X[out])
                        oob_cnt[out] += 1
                else:
                    tree.fit(X, y)
                self.estimators_.append(tree)
        imp = np.mean([t.feature_importances_ for t in self.estimators_], axis=0)
        self.feature_importances_ = imp / imp.sum() if imp.sum() > 0 else imp
        if self.oob_score:
            seen = oob_cnt > 0
            self.oob_prediction_ = np.where(seen, oob_sum / np.maximum(oob_cnt, 1), np.nan)
            self.oob_mse_ = float(np.mean((self.oob_prediction_[seen] - y[seen]) ** 2)) \
                if seen.any() else np.nan
        return self

    def predict(self, X):
        check_is_fitted(self, "estimators_")
        X = check_X(X, self.n_features_in_)
        out = np.zeros(len(X))
        for tree in self.estimators_:
            out += tree.predict(X)
        return out / len(self.estimators_)


class RandomForestRegressor(_BaseForest):
    """Bootstrap-aggregated CART trees with exhaustive threshold search.

    ``oob_score=True`` additionally stores ``oob_prediction_`` and
    ``oob_mse_``. ``feature_importances_`` is the mean per-tree share of the
    squared-error reduction.
    """

    _splitter = "best"

    def __init__(self, n_estimators=200, max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, max_features=None, bootstrap=True,
                 oob_score=False, random_state=None):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.oob_score = oob_score
        self.random_state = random_state


class ExtraTreesRegressor(_BaseForest):
    """Extremely randomised trees: one random threshold per candidate feature,
    grown on the full sample unless ``bootstrap`` is set."""

    _splitter = "random"

    def __init__(self, n_estimators=100, max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, max_features=None, bootstrap=False,
                 oob_score=False, random_state=None):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.oob_score = oob_score
        self.random_state = random_state


def fit_forest(X, y, n_trees, mode="rf", oob=False, rng_seed=None, **tree_params):
    if mode == "rf":
        est = RandomForestRegressor(n_estimators=n_trees, oob_score=oob,
                                    random_state=rng_seed, **tree_params)
    elif mode == "ert":
        est = ExtraTreesRegressor(n_estimators=n_trees, oob_score=oob, bootstrap=oob,
                                  random_state=rng_seed, **tree_params)
    else:
        raise ValueError(f"unknown forest mode {mode!r}")
    return est.fit(X, y)
