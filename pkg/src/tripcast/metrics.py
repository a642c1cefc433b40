"""Scores for destination (mean haversine distance) and travel time (RMSLE)."""

import numpy as np

from .geo import haversine_array


def mhd_score(preds, actuals) -> float:
    """Mean haversine distance in km between predicted and true (lat, lon)."""
    p = np.asarray(preds, dtype=float).reshape(-1, 2)
    a = np.asarray(actuals, dtype=float).reshape(-1, 2)
    if len(p) != len(a):
        raise ValueError(f"{len(p)} predictions for {len(a)} actuals")
    if len(p) == 0:
        raise ValueError("cannot score an empty prediction set")
    return float(np.mean(haversine_array(p[:, 0], p[:, 1], a[:, 0], a[:, 1])))


def rmsle_score(preds, actuals) -> float:
    p = np.asarray(preds, dtype=float).ravel()
    a = np.asarray(actuals, dtype=float).ravel()
    if len(p) != len(a):
        raise ValueError(f"{len(p)} predictions for {len(a)} actuals")
    if len(p) == 0:
        raise ValueError("cannot score an empty prediction set")
    if (p < 0).any() or (a < 0).any():
        raise ValueError("RMSLE is undefined for negative values")
    return float(np.sqrt(np.mean((np.log(p + 1) - np.log(a + 1)) ** 2)))
