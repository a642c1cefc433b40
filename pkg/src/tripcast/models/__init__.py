from .boosting import GradientBoostingRegressor, fit_gbrt
from .forest import ExtraTreesRegressor, RandomForestRegressor, fit_forest
from .linear import AverageRegressor, LassoRegression, RidgeRegression, make_meta
from .persistence import SchemaMismatchError, load_model, read_header, save_model
from .recipes import (DestinationPredictor, TravelTimeEnsemble, average_predictions,
                      gps_count_mask, quantile_keep_mask, table1_zoo)
from .stacking import StackingEnsemble, fit_stacking
from .tree import RegressionTree, fit_regression_tree

__all__ = [
    "AverageRegressor", "DestinationPredictor", "ExtraTreesRegressor",
    "GradientBoostingRegressor", "LassoRegression", "RandomForestRegressor",
    "RegressionTree", "RidgeRegression", "SchemaMismatchError", "StackingEnsemble",
    "TravelTimeEnsemble", "average_predictions", "fit_forest", "fit_gbrt",
    "fit_regression_tree", "fit_stacking", "gps_count_mask", "load_model", "make_meta",
    "quantile_keep_mask", "read_header", "save_model", "table1_zoo",
]
