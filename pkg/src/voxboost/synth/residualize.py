"""Covariate residualization and covariate normalization.

Residualization mirrors a held-out-evaluation protocol: fit ordinary least
squares of the raw score on brain volume, age, the two ordinal parental
fields and one-hot-encoded (first level dropped) site / sex / ethnicity /
marital status, over every train/validation subject with complete
covariates.  Subjects missing any covariate are excluded from the fit and
re-tagged ``fold = "excluded"`` so no downstream stage trains on them.
Test-fold residuals are computed with the same fitted model but returned
separately as sealed answers rather than stored on the records.

Normal equations carry an L2 jitter of 1e-8 on the (column-rescaled)
Gram diagonal; column rescaling leaves the fitted subspace unchanged
while keeping the jitter meaningful for very differently scaled columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import ConfigError, InvalidInputError
from .cohort import ETHNICITIES, MARITAL, SEXES, SITES, SubjectRecord

_GRAM_JITTER = 1e-8


@dataclass
class LinearModelFit:
    column_names: list[str]
    coefficients: np.ndarray  # aligned with column_names; [0] is the intercept

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    def predict(self, design: np.ndarray) -> np.ndarray:
        return design @ self.coefficients


def design_row(demo) -> list[float]:
    row = [1.0, demo.brain_volume, demo.age_months,
           float(demo.parental_education), float(demo.parental_income)]
    row += [1.0 if demo.site == s else 0.0 for s in SITES[1:]]
    row += [1.0 if demo.sex == s else 0.0 for s in SEXES[1:]]
    row += [1.0 if demo.ethnicity == e else 0.0 for e in ETHNICITIES[1:]]
    row += [1.0 if demo.marital_status == m else 0.0 for m in MARITAL[1:]]
    return row


def design_columns() -> list[str]:
    names = ["intercept", "brain_volume", "age_months",
             "parental_education", "parental_income"]
    names += [f"site={s}" for s in SITES[1:]]
    names += [f"sex={s}" for s in SEXES[1:]]
    names += [f"ethnicity={e}" for e in ETHNICITIES[1:]]
    names += [f"marital_status={m}" for m in MARITAL[1:]]
    return names


def _collinear_columns(design: np.ndarray, names: list[str]) -> list[str]:
    """Names of columns a pivoted QR flags as (nearly) linearly dependent."""
    _, r, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(design.shape) * np.finfo(np.float64).eps * (diag[0] if diag.size else 0.0)
    return [names[piv[i]] for i in range(len(diag)) if diag[i] <= tol]


def fit_ols(design: np.ndarray, y: np.ndarray, names: list[str]) -> LinearModelFit:
    """Least squares by jittered normal equations on rescaled columns."""
    if design.ndim != 2 or design.shape[0] != y.shape[0] or design.shape[0] == 0:
        raise InvalidInputError("design matrix and target must pair non-empty rows")
    bad = _collinear_columns(design, names)
    if bad:
        raise ConfigError(f"rank-deficient residualization design; collinear columns: {bad}")
    scale = np.abs(design).max(axis=0)
    scale[scale == 0.0] = 1.0
    d = design / scale
    gram = d.T @ d + _GRAM_JITTER * np.eye(d.shape[1])
    beta_scaled = np.linalg.solve(gram, d.T @ y)
    return LinearModelFit(column_names=list(names), coefficients=beta_scaled / scale)


def residualize(records: list[SubjectRecord]):
    """Fill residual scores in place; returns (records, sealed_answers, fit).

    ``sealed_answers`` maps test subject ids to their residuals, which are
    deliberately not stored on the records.
    """
    fit_rows = [r for r in records
                if r.fold in ("train", "validation") and not r.demographics.has_missing()]
    if len(fit_rows) < len(design_columns()):
        raise ConfigError(
            f"only {len(fit_rows)} complete train/validation subjects for a "
            f"{len(design_columns())}-column design")
    names = design_columns()
    design = np.array([design_row(r.demographics) for r in fit_rows])
    y = np.array([r.raw_score for r in fit_rows])
    fit = fit_ols(design, y, names)

    sealed: dict[str, float] = {}
    for r in records:
        if r.fold in ("train", "validation"):
            if r.demographics.has_missing():
                r.fold = "excluded"
                r.residual_score = None
            else:
                pred = float(np.dot(design_row(r.demographics), fit.coefficients))
                r.residual_score = r.raw_score - pred
        elif r.fold == "test":
            pred = float(np.dot(design_row(r.demographics), fit.coefficients))
            sealed[r.subject_id] = r.raw_score - pred
    return records, sealed, fit


@dataclass
class CovariateScaler:
    """Per-covariate z-score parameters estimated on the train fold only."""

    mean: np.ndarray
    std: np.ndarray  # entries < 1e-12 replaced by 1.0 (centered pass-through)

    def transform(self, derived: np.ndarray) -> np.ndarray:
        return (np.asarray(derived, dtype=np.float64) - self.mean) / self.std


def normalize_covariates(records: list[SubjectRecord]):
    """(scaler fitted on the train fold, transformed matrix for all records)."""
    train = [r for r in records if r.fold == "train"]
    if not train:
        raise InvalidInputError("normalize_covariates requires a non-empty train fold")
    mat = np.array([r.derived for r in train], dtype=np.float64)
    mean = mat.mean(axis=0)
    std = mat.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    scaler = CovariateScaler(mean=mean, std=std)
    all_mat = np.array([r.derived for r in records], dtype=np.float64)
    return scaler, scaler.transform(all_mat)


def orthogonality_report(design: np.ndarray, residuals: np.ndarray) -> float:
    """max_j |<residual, col_j>| / (||col_j|| * ||residual||)."""
    res_norm = math.sqrt(float(residuals @ residuals))
    worst = 0.0
    for j in range(design.shape[1]):
        col = design[:, j]
        denom = math.sqrt(float(col @ col)) * res_norm
        if denom > 0:
            worst = max(worst, abs(float(col @ residuals)) / denom)
    return worst
