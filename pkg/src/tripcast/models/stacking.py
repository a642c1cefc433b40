"""Stacked generalisation with a held-out validation/test split."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import check_X, check_X_y
from .linear import AverageRegressor, make_meta


def _rmse(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


class StackingEnsemble(RegressorMixin, BaseEstimator):
    """Base regressors combined by a meta-regressor.

    ``fit`` follows this procedure:

    1. draw disjoint validation and local-test sets of equal size from the
       training rows (``val_frac`` and ``test_frac`` must match);
    2. fit every base model on the remaining rows and predict the
       validation set;
    3. fit the meta-regressor on those predictions;
    4. refit the base models on remaining + validation rows;
    5. predict the local test set and score bases and ensemble on it.

    ``local_test_report_`` maps each base name and ``"ensemble"`` to its RMSE
    on the local test set (in target space).

    Parameters
    ----------
    estimators : list of (name, estimator)
    meta : {"average", "ridge", "lasso"}
    meta_alpha : float
        Penalty for the linear metas.
    """

    def __init__(self, estimators, meta="average", meta_alpha=1e-3, val_frac=0.1,
                 test_frac=0.1, random_state=None):
        self.estimators = estimators
        self.meta = meta
        self.meta_alpha = meta_alpha
        self.val_frac = val_frac
        self.test_frac = test_frac
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if not self.estimators:
            raise ValueError("at least one base estimator is required")
        if not np.isclose(self.val_frac, self.test_frac):
            raise ValueError("validation and local test sets must have equal size")
        n = len(y)
        n_hold = int(round(self.val_frac * n))
        if n_hold < 1 or n - 2 * n_hold < 1:
            raise ValueError(f"{n} rows cannot be split with val_frac={self.val_frac}")
        self.meta_ = make_meta(self.meta, self.meta_alpha)
        if len(self.estimators) < 2 and not isinstance(self.meta_, AverageRegressor):
            warnings.warn("linear meta-regressor over a single base model", UserWarning,
                          stacklevel=2)
        perm = np.random.default_rng(self.random_state).permutation(n)
        val, test, train = perm[:n_hold], perm[n_hold:2 * n_hold], perm[2 * n_hold:]
        self.val_index_, self.test_index_ = np.sort(val), np.sort(test)

        names = [name for name, _ in self.estimators]
        first = [clone(est).fit(X[train], y[train]) for _, est in self.estimators]
        P_val = np.column_stack([m.predict(X[val]) for m in first])
        self.meta_.fit(P_val, y[val])

        refit = np.concatenate([train, val])
        self.estimators_ = [clone(est).fit(X[refit], y[refit]) for _, est in self.estimators]
        self.n_features_in_ = X.shape[1]

        P_test = self.base_predictions(X[test])
        report = {name: _rmse(P_test[:, j], y[test]) for j, name in enumerate(names)}
        report["ensemble"] = _rmse(self.meta_.predict(P_test), y[test])
        self.local_test_report_ = report
        return self

    def base_predictions(self, X):
        check_is_fitted(self, "estimators_")
        X = check_X(X, self.n_features_in_)
        return np.column_stack([m.predict(X) for m in self.estimators_])

    def predict(self, X):
        return self.meta_.predict(self.base_predictions(X))

    @property
    def meta_weights_(self):
        check_is_fitted(self, "meta_")
        if isinstance(self.meta_, AverageRegressor):
            return None
        return np.append(self.meta_.coef_, self.meta_.intercept_)


def fit_stacking(base_models, X, y, split=(0.1, 0.1), meta="average", meta_alpha=1e-3,
                 rng_seed=None):
    val_frac, test_frac = split
    return StackingEnsemble(base_models, meta=meta, meta_alpha=meta_alpha, val_frac=val_frac,
                            test_frac=test_frac, random_state=rng_seed).fit(X, y)
