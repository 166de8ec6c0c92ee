"""Experiment orchestration: grid search, experiment arms, scoring."""

from .experiment import (
    ArmResult,
    CnnGbmResult,
    ExperimentReport,
    derived_matrix,
    fold_records,
    residual_vector,
    run_ablation,
    run_cnn_gbm,
    run_gbm_arm,
    stage_extract,
    stage_grid_search,
    stage_predict,
    stage_train_encoder,
    stage_train_gbm,
)
from .grid import GridRow, GridSpec, two_stage_grid_search
from .scoring import evaluate_mse, read_predictions, score_predictions, write_predictions

__all__ = [
    "ArmResult",
    "CnnGbmResult",
    "ExperimentReport",
    "GridRow",
    "GridSpec",
    "derived_matrix",
    "evaluate_mse",
    "fold_records",
    "read_predictions",
    "residual_vector",
    "run_ablation",
    "run_cnn_gbm",
    "run_gbm_arm",
    "score_predictions",
    "stage_extract",
    "stage_grid_search",
    "stage_predict",
    "stage_train_encoder",
    "stage_train_gbm",
    "two_stage_grid_search",
    "write_predictions",
]
