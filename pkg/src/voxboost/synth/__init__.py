"""Synthetic cohorts: volumes, covariates, demographics, residualization."""

from .cohort import (
    CohortConfig,
    DemographicCovariates,
    SubjectRecord,
    fold_assignment,
    generate_cohort,
    linear_score_part,
    load_cohort_volumes,
    nonlinear_score_part,
    region_centers,
    region_tissue_classes,
    signal_regions,
    split_folds,
)
from .manifest import (
    manifest_columns,
    read_manifest,
    read_sealed_answers,
    write_manifest,
    write_sealed_answers,
)
from .residualize import (
    CovariateScaler,
    LinearModelFit,
    design_columns,
    design_row,
    fit_ols,
    normalize_covariates,
    orthogonality_report,
    residualize,
)

__all__ = [
    "CohortConfig",
    "CovariateScaler",
    "DemographicCovariates",
    "LinearModelFit",
    "SubjectRecord",
    "design_columns",
    "design_row",
    "fit_ols",
    "fold_assignment",
    "generate_cohort",
    "linear_score_part",
    "load_cohort_volumes",
    "manifest_columns",
    "nonlinear_score_part",
    "normalize_covariates",
    "orthogonality_report",
    "read_manifest",
    "read_sealed_answers",
    "region_centers",
    "region_tissue_classes",
    "residualize",
    "signal_regions",
    "split_folds",
    "write_manifest",
    "write_sealed_answers",
]
