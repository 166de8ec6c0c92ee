"""Gradient boosting machine over exact-greedy penalized regression trees."""

from .boosting import (
    fit,
    init_estimator,
    line_search_rho,
    predict,
    pseudo_residuals,
    staged_predict,
    subsample_rows,
)
from .io import load_model, save_model
from .trees import fit_tree, leaf_value, soft_threshold
from .types import GbmHyperparams, GbmModel, RegressionTree

__all__ = [
    "GbmHyperparams",
    "GbmModel",
    "RegressionTree",
    "fit",
    "fit_tree",
    "init_estimator",
    "leaf_value",
    "line_search_rho",
    "load_model",
    "predict",
    "pseudo_residuals",
    "save_model",
    "soft_threshold",
    "staged_predict",
    "subsample_rows",
]
