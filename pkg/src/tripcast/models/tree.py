"""CART regression tree shared by the forests and the boosting stages."""

from __future__ import annotations

import math
import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_X, check_X_y

LEAF = -1


def resolve_max_features(max_features, n_features: int) -> int:
    if max_features is None or max_features == "all":
        return n_features
    if max_features == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if max_features == "log2":
        return max(1, int(math.log2(n_features)))
    if isinstance(max_features, (int, np.integer)) and not isinstance(max_features, bool):
        if not 1 <= max_features <= n_features:
            raise ValueError(f"max_features={max_features} outside [1, {n_features}]")
        return int(max_features)
    if isinstance(max_features, float) and 0.0 < max_features <= 1.0:
        return max(1, int(max_features * n_features))
    raise ValueError(f"invalid max_features {max_features!r}")


def effective_min_split(min_samples_split: int) -> int:
    if min_samples_split < 2:
        warnings.warn(f"min_samples_split={min_samples_split} cannot produce two children; "
                      "using 2", UserWarning, stacklevel=3)
        return 2
    return int(min_samples_split)


class RegressionTree(RegressorMixin, BaseEstimator):
    """Binary regression tree grown by squared-error reduction.

    Parameters
    ----------
    max_depth : int or None
        None grows until leaves are pure or too small to split.
    min_samples_split : int
        Values below 2 are raised to 2 with a warning.
    min_samples_leaf : int
    max_features : {"all", "sqrt", "log2"}, int, float or None
        Number of features drawn (without replacement) at every split.
        If none of the drawn features admits a valid split the remaining
        ones are tried before the node is made a leaf.
    splitter : {"best", "random"}
        "best" scans every threshold; "random" draws one uniform threshold
        per candidate feature (extremely randomised trees).
    random_state : int or None
    """

    def __init__(self, max_depth=None, min_samples_split=2, min_samples_leaf=1,
                 max_features=None, splitter="best", random_state=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.splitter = splitter
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.splitter not in ("best", "random"):
            raise ValueError(f"unknown splitter {self.splitter!r}")
        n, p = X.shape
        self.n_features_in_ = p
        self._min_split = effective_min_split(self.min_samples_split)
        self._k = resolve_max_features(self.max_features, p)
        self._rng = np.random.default_rng(self.random_state)
        self._grow(X, y)
        del self._rng
        return self

    def _grow(self, X, y):
        feature, threshold, value, left, right, n_node = [], [], [], [], [], []
        importance = np.zeros(X.shape[1])
        max_depth = np.inf if self.max_depth is None else self.max_depth

        def new_node(idx):
            feature.append(LEAF)
            threshold.append(np.nan)
            value.append(float(y[idx].mean()))
            left.append(LEAF)
            right.append(LEAF)
            n_node.append(len(idx))
            return len(feature) - 1

        root = new_node(np.arange(len(y)))
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            if depth >= max_depth or len(idx) < max(self._min_split, 2 * self.min_samples_leaf):
                continue
            split = self._best_split(X, y, idx)
            if split is None:
                continue
            f, thr, gain = split
            mask = X[idx, f] <= thr
            li, ri = idx[mask], idx[~mask]
            importance[f] += gain
            feature[node] = f
            threshold[node] = thr
            left[node] = new_node(li)
            right[node] = new_node(ri)
            # right pushed first so the left subtree is numbered first
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature_ = np.array(feature, dtype=np.intp)
        self.threshold_ = np.array(threshold, dtype=float)
        self.value_ = np.array(value, dtype=float)
        self.children_left_ = np.array(left, dtype=np.intp)
        self.children_right_ = np.array(right, dtype=np.intp)
        self.n_node_samples_ = np.array(n_node, dtype=np.intp)
        self.importance_raw_ = importance
        total = importance.sum()
        self.feature_importances_ = importance / total if total > 0 else importance

    def _best_split(self, X, y, idx):
        yc = y[idx] - y[idx].mean()
        if not np.any(yc):
            return None
        order = self._rng.permutation(X.shape[1])
        first, rest = order[: self._k], order[self._k:]
        found = self._scan(X, yc, idx, first)
        if found is None and len(rest):
            found = self._scan(X, yc, idx, rest)
        return found

    def _scan(self, X, yc, idx, feats):
        if self.splitter == "best":
            return self._scan_exhaustive(X, yc, idx, feats)
        return self._scan_random(X, yc, idx, feats)

    def _scan_exhaustive(self, X, yc, idx, feats):
        m = len(idx)
        leaf = self.min_samples_leaf
        Xn = X[np.ix_(idx, feats)]
        order = np.argsort(Xn, axis=0, kind="stable")
        xs = np.take_along_axis(Xn, order, axis=0)
        ys = yc[order]
        csum = np.cumsum(ys, axis=0)[:-1]
        nl = np.arange(1, m, dtype=float)[:, None]
        nr = m - nl
        total = ys.sum(axis=0)
        gain = csum ** 2 / nl + (total - csum) ** 2 / nr - total ** 2 / m
        valid = xs[1:] > xs[:-1]
        if leaf > 1:
            valid[: leaf - 1] = False
            valid[m - leaf:] = False
        if not valid.any():
            return None
        gain = np.where(valid, gain, -np.inf)
        i, j = np.unravel_index(int(np.argmax(gain)), gain.shape)
        lo, hi = xs[i, j], xs[i + 1, j]
        thr = lo + (hi - lo) / 2.0
        if not lo <= thr < hi:
            thr = lo
        return int(feats[j]), float(thr), float(gain[i, j])

    def _scan_random(self, X, yc, idx, feats):
        m = len(idx)
        leaf = self.min_samples_leaf
        Xn = X[np.ix_(idx, feats)]
        lo = Xn.min(axis=0)
        hi = Xn.max(axis=0)
        draws = self._rng.uniform(size=len(feats))
        usable = hi > lo
        if not usable.any():
            return None
        thr = lo + draws * (hi - lo)
        # the upper bound must stay strictly greater than the threshold
        thr = np.where(thr >= hi, lo, thr)
        L = Xn <= thr
        nl = L.sum(axis=0).astype(float)
        nr = m - nl
        sl = yc @ L
        total = yc.sum()
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = sl ** 2 / nl + (total - sl) ** 2 / nr - total ** 2 / m
        valid = usable & (nl >= leaf) & (nr >= leaf)
        if not valid.any():
            return None
        gain = np.where(valid, gain, -np.inf)
        j = int(np.argmax(gain))
        return int(feats[j]), float(thr[j]), float(gain[j])

    def apply(self, X):
        """Leaf index reached by every row of X."""
        check_is_fitted(self, "feature_")
        X = check_X(X, self.n_features_in_)
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        active = self.feature_[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature_[nd]] <= self.threshold_[nd]
            node[r] = np.where(go_left, self.children_left_[nd], self.children_right_[nd])
            active = self.feature_[node] != LEAF
        return node

    def predict(self, X):
        return self.value_[self.apply(X)]

    @property
    def n_leaves_(self):
        return int((self.feature_ == LEAF).sum())


def fit_regression_tree(X, y, max_depth=None, min_samples_split=2, min_samples_leaf=1,
                        max_features=None, random_threshold=False, rng_seed=None):
    return RegressionTree(max_depth=max_depth, min_samples_split=min_samples_split,
                          min_samples_leaf=min_samples_leaf, max_features=max_features,
                          splitter="random" if random_threshold else "best",
                          random_state=rng_seed).fit(X, y)
