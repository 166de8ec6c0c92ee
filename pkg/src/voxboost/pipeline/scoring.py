"""Standalone scoring: MSE between a predictions file and an answers file.

This is the only place test-fold truth is ever read.  Model-fitting code
paths receive neither the answers file nor its contents; they emit a
predictions CSV, and this step joins it against the sealed answers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import InvalidInputError
from ..tabular import mean_squared_error, read_rows, write_rows


def evaluate_mse(predictions: np.ndarray, truth: np.ndarray) -> float:
    """(1/N) sum (y - y_hat)^2 with sequential 64-bit accumulation."""
    return mean_squared_error(truth, predictions)


def write_predictions(path: str | Path, subject_ids: list[str],
                      predictions: np.ndarray) -> None:
    predictions = np.asarray(predictions, dtype=np.float64)
    if len(subject_ids) != predictions.shape[0]:
        raise InvalidInputError("subject id count must match prediction count")
    write_rows(path, ["subject_id", "prediction"],
               [[sid, val] for sid, val in zip(subject_ids, predictions)])


def read_predictions(path: str | Path) -> tuple[list[str], np.ndarray]:
    header, rows = read_rows(path)
    if header != ["subject_id", "prediction"]:
        raise InvalidInputError(f"unexpected predictions columns in {path}")
    ids = [r[0] for r in rows]
    return ids, np.array([float(r[1]) for r in rows], dtype=np.float64)


def score_predictions(predictions_path: str | Path, answers_path: str | Path) -> float:
    """Join predictions against answers by subject id and return the MSE.

    Every answered subject must be predicted; extra predictions are
    ignored.  Accumulation follows the answers file's row order.
    """
    ids, preds = read_predictions(predictions_path)
    by_id = dict(zip(ids, preds))
    if len(by_id) != len(ids):
        raise InvalidInputError(f"duplicate subject ids in {predictions_path}")
    header, rows = read_rows(answers_path)
    if header[0] != "subject_id" or len(header) != 2:
        raise InvalidInputError(f"unexpected answer columns in {answers_path}")
    missing = [r[0] for r in rows if r[0] not in by_id]
    if missing:
        raise InvalidInputError(
            f"predictions missing for {len(missing)} answered subjects "
            f"(first: {missing[:3]})")
    truth = np.array([float(r[1]) for r in rows])
    predicted = np.array([by_id[r[0]] for r in rows])
    return mean_squared_error(truth, predicted)
