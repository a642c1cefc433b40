"""Stagewise gradient boosting with regression trees."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_X, check_X_y
from .tree import RegressionTree

LOSS_ALIASES = {
    "squared_error": "squared_error",
    "squared_loss": "squared_error",
    "squared": "squared_error",
    "ls": "squared_error",
    "absolute_error": "absolute_error",
    "least_absolute_deviation": "absolute_error",
    "lad": "absolute_error",
    "huber": "huber",
    "quantile": "quantile",
}


def huber_location(y, delta: float, n_iter: int = 50, tol: float = 1e-10) -> float:
    """Huber M-estimate of location by iteratively reweighted means."""
    y = np.asarray(y, dtype=float)
    mu = float(np.median(y))
    if delta <= 0:
        return mu
    for _ in range(n_iter):
        r = np.abs(y - mu)
        w = np.where(r <= delta, 1.0, delta / np.maximum(r, 1e-300))
        new = float(w @ y / w.sum())
        if abs(new - mu) <= tol * max(1.0, abs(mu)):
            return new
        mu = new
    return mu


class GradientBoostingRegressor(RegressorMixin, BaseEstimator):
    """Friedman-style gradient boosting.

    Each stage fits a regression tree to the negative gradient on a random
    ``subsample`` of rows, re-estimates the leaf values for the loss on the
    same rows, and adds ``learning_rate`` times the tree.

    loss : {"squared_error", "absolute_error", "huber", "quantile"}
        Table-style aliases ("squared_loss", "least_absolute_deviation") are
        accepted. For huber, ``alpha`` is the quantile of absolute residuals
        used as the transition point, recomputed every stage; for quantile it
        is the target quantile.

    ``train_score_[m]`` holds the training loss after stage m on all rows.
    """

    def __init__(self, loss="squared_error", learning_rate=0.1, n_estimators=100,
                 subsample=1.0, alpha=0.9, max_depth=3, min_samples_split=2,
                 min_samples_leaf=1, max_features=None, random_state=None):
        self.loss = loss
        self.learning_rate = learning_rate
        self.n_estimators = n_estimators
        self.subsample = subsample
        self.alpha = alpha
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state

    def _check_params(self):
        if self.loss not in LOSS_ALIASES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must lie in (0, 1]")
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be >= 0")
        return LOSS_ALIASES[self.loss]

    def _init_value(self, loss, y):
        if loss == "squared_error":
            return float(y.mean())
        if loss == "absolute_error":
            return float(np.median(y))
        if loss == "quantile":
            return float(np.quantile(y, self.alpha))
        med = float(np.median(y))
        delta = float(np.quantile(np.abs(y - med), self.alpha))
        return huber_location(y, delta)

    def _loss_value(self, loss, y, f, delta=None):
        r = y - f
        if loss == "squared_error":
            return float(np.mean(r ** 2))
        if loss == "absolute_error":
            return float(np.mean(np.abs(r)))
        if loss == "quantile":
            a = self.alpha
            return float(np.mean(np.where(r > 0, a * r, (a - 1) * r)))
        if delta is None:
            delta = float(np.quantile(np.abs(r), self.alpha))
        ar = np.abs(r)
        return float(np.mean(np.where(ar <= delta, 0.5 * r ** 2, delta * (ar - 0.5 * delta))))

    def _negative_gradient(self, loss, y, f):
        r = y - f
        if loss == "squared_error":
            return r, None
        if loss == "absolute_error":
            return np.sign(r), None
        if loss == "quantile":
            return np.where(r > 0, self.alpha, self.alpha - 1.0), None
        delta = float(np.quantile(np.abs(r), self.alpha))
        return np.where(np.abs(r) <= delta, r, delta * np.sign(r)), delta

    def _leaf_value(self, loss, r, delta):
        if loss == "absolute_error":
            return float(np.median(r))
        if loss == "quantile":
            return float(np.quantile(r, self.alpha))
        med = float(np.median(r))
        d = r - med
        return med + float(np.mean(np.sign(d) * np.minimum(delta, np.abs(d))))

    def fit(self, X, y):
        loss = self._check_params()
        X, y = check_X_y(X, y)
        n = len(y)
        self.n_features_in_ = X.shape[1]
        self._loss = loss
        self.init_ = self._init_value(loss, y)
        f = np.full(n, self.init_)
        rng = np.random.default_rng(self.random_state)
        n_sub = max(1, int(round(self.subsample * n)))
        self.estimators_ = []
        self.train_score_ = np.zeros(self.n_estimators)
        imp = np.zeros(X.shape[1])
        for m in range(self.n_estimators):
            rows = np.sort(rng.choice(n, n_sub, replace=False)) if n_sub < n else np.arange(n)
            g, delta = self._negative_gradient(loss, y, f)
            tree = RegressionTree(max_depth=self.max_depth,
                                  min_samples_split=self.min_samples_split,
                                  min_samples_leaf=self.min_samples_leaf,
                                  max_features=self.max_features,
                                  random_state=int(rng.integers(0, 2**31 - 1)))
            tree.fit(X[rows], g[rows])
            if loss != "squared_error":
                leaves = tree.apply(X[rows])
                r = (y - f)[rows]
                for leaf in np.unique(leaves):
                    tree.value_[leaf] = self._leaf_value(loss, r[leaves == leaf], delta)
            f = f + self.learning_rate * tree.predict(X)
            self.estimators_.append(tree)
            self.train_score_[m] = self._loss_value(loss, y, f)
            imp += tree.importance_raw_
        self.feature_importances_ = imp / imp.sum() if imp.sum() > 0 else imp
        return self

    def staged_predict(self, X):
        check_is_fitted(self, "estimators_")
        X = check_X(X, self.n_features_in_)
        f = np.full(len(X), self.init_)
        for tree in self.estimators_:
            f = f + self.learning_rate * tree.predict(X)
            yield f

    def predict(self, X):
        check_is_fitted(self, "estimators_")
        X = check_X(X, self.n_features_in_)
        f = np.full(len(X), self.init_)
        for tree in self.estimators_:
            f += self.learning_rate * tree.predict(X)
        return f


def fit_gbrt(X, y, rng_seed=None, **params):
    return GradientBoostingRegressor(random_state=rng_seed, **params).fit(X, y)
