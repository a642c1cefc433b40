import numpy as np


def check_X(X, n_features=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("X contains NaN or infinite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, model was fitted with {n_features}")
    return X


def check_X_y(X, y, multi_output=False):
    X = check_X(X)
    y = np.asarray(y, dtype=float)
    if not multi_output and y.ndim != 1:
        y = y.ravel() if y.ndim == 2 and y.shape[1] == 1 else y
        if y.ndim != 1:
            raise ValueError(f"expected 1-D targets, got shape {y.shape}")
    if len(X) != len(y):
        raise ValueError(f"X has {len(X)} rows but y has {len(y)}")
    if len(y) == 0:
        raise ValueError("cannot fit on empty data")
    if not np.isfinite(y).all():
        raise ValueError("y contains NaN or infinite values")
    return X, y
