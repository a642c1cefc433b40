"""Meta-regressors that combine base-model predictions."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_X, check_X_y


class AverageRegressor(RegressorMixin, BaseEstimator):
    """Unweighted mean of the input columns. Fitting ignores ``y``."""

    def fit(self, X, y=None):
        X = check_X(X)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        return check_X(X, self.n_features_in_).mean(axis=1)


class RidgeRegression(RegressorMixin, BaseEstimator):
    """Least squares with an L2 penalty ``alpha * ||w||^2``; the intercept is
    not penalised."""

    def __init__(self, alpha=1e-3):
        self.alpha = alpha

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        xm, ym = X.mean(axis=0), y.mean()
        Xc = X - xm
        A = Xc.T @ Xc + self.alpha * np.eye(X.shape[1])
        self.coef_ = np.linalg.lstsq(A, Xc.T @ (y - ym), rcond=None)[0]
        self.intercept_ = float(ym - xm @ self.coef_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return check_X(X, self.n_features_in_) @ self.coef_ + self.intercept_


def soft_threshold(z, t):
    return np.sign(z) * max(abs(z) - t, 0.0)


class LassoRegression(RegressorMixin, BaseEstimator):
    """L1-penalised least squares by cyclic coordinate descent.

    Minimises ``1/(2n) ||y - Xw - b||^2 + alpha ||w||_1`` with an
    unpenalised intercept.
    """

    def __init__(self, alpha=1e-3, max_iter=10_000, tol=1e-10):
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        n, p = X.shape
        xm, ym = X.mean(axis=0), y.mean()
        Xc = X - xm
        yc = y - ym
        col_sq = (Xc ** 2).sum(axis=0) / n
        w = np.zeros(p)
        r = yc.copy()
        self.n_iter_ = 0
        for it in range(self.max_iter):
            max_step = 0.0
            for j in range(p):
                if col_sq[j] == 0.0:
                    continue
                old = w[j]
                rho = Xc[:, j] @ r / n + col_sq[j] * old
                w[j] = soft_threshold(rho, self.alpha) / col_sq[j]
                if w[j] != old:
                    r -= Xc[:, j] * (w[j] - old)
                    max_step = max(max_step, abs(w[j] - old))
            self.n_iter_ = it + 1
            if max_step <= self.tol * max(1.0, np.abs(w).max()):
                break
        self.coef_ = w
        self.intercept_ = float(ym - xm @ w)
        self.n_features_in_ = p
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return check_X(X, self.n_features_in_) @ self.coef_ + self.intercept_


def make_meta(meta: str, alpha: float = 1e-3):
    if meta == "average":
        return AverageRegressor()
    if meta in ("ridge", "l2"):
        return RidgeRegression(alpha=alpha)
    if meta in ("lasso", "l1"):
        return LassoRegression(alpha=alpha)
    raise ValueError(f"unknown meta-regressor {meta!r}")
