"""Residualization, exclusion rules, covariate normalization, manifests."""

import numpy as np
import pytest

from voxboost.errors import ConfigError
from voxboost.synth import (
    CohortConfig,
    design_columns,
    design_row,
    fit_ols,
    generate_cohort,
    normalize_covariates,
    orthogonality_report,
    read_manifest,
    read_sealed_answers,
    residualize,
    write_manifest,
    write_sealed_answers,
)


def cohort(tmp_path, **kw):
    base = dict(n_train=40, n_val=10, n_test=12, volume_size=24, n_regions=27,
                noise_level=1.0, missing_rate=0.0, nonlinear_strength=6.0, seed=11)
    base.update(kw)
    cfg = CohortConfig(**base)
    return cfg, generate_cohort(cfg, tmp_path)


def test_fit_ols_matches_pseudo_inverse():
    rng = np.random.default_rng(8)
    design = np.column_stack([np.ones(60), rng.normal(size=(60, 7))])
    y = rng.normal(size=60)
    names = [f"c{i}" for i in range(8)]
    fit = fit_ols(design, y, names)
    beta_pinv = np.linalg.pinv(design) @ y
    np.testing.assert_allclose(fit.coefficients, beta_pinv, rtol=1e-7, atol=1e-8)


def test_fit_ols_reports_collinear_columns():
    rng = np.random.default_rng(9)
    x = rng.normal(size=60)
    design = np.column_stack([np.ones(60), x, 2.0 * x])
    with pytest.raises(ConfigError) as err:
        fit_ols(design, rng.normal(size=60), ["intercept", "x", "x_times_2"])
    assert "collinear" in str(err.value)


def test_intercept_only_residuals_are_centered():
    rng = np.random.default_rng(10)
    y = rng.normal(size=30) + 5.0
    fit = fit_ols(np.ones((30, 1)), y, ["intercept"])
    res = y - fit.predict(np.ones((30, 1)))
    np.testing.assert_allclose(res, y - y.mean(), atol=1e-7)


def test_residuals_orthogonal_to_design(tmp_path):
    _, records = cohort(tmp_path)
    records, _, fit = residualize(records)
    rows = [r for r in records if r.fold in ("train", "validation")]
    design = np.array([design_row(r.demographics) for r in rows])
    res = np.array([r.residual_score for r in rows])
    assert orthogonality_report(design, res) < 1e-6
    # residuals of a design with intercept sum to ~0
    assert abs(res.sum()) < 1e-6 * np.abs(res).sum()


def test_exactly_linear_scores_give_zero_residuals(tmp_path):
    _, records = cohort(tmp_path, noise_level=0.0, nonlinear_strength=0.0)
    records, sealed, _ = residualize(records)
    for r in records:
        if r.fold in ("train", "validation"):
            assert abs(r.residual_score) < 1e-6
    for v in sealed.values():
        assert abs(v) < 1e-6


def test_missing_covariates_excluded_from_fit_and_folds(tmp_path):
    cfg, records = cohort(tmp_path, n_train=60, n_val=15, missing_rate=0.08, seed=21)
    incomplete = {r.subject_id for r in records
                  if r.fold in ("train", "validation") and r.demographics.has_missing()}
    assert incomplete, "test needs some incomplete subjects"
    records, sealed, _ = residualize(records)
    for r in records:
        if r.subject_id in incomplete:
            assert r.fold == "excluded"
            assert r.residual_score is None
        elif r.fold in ("train", "validation"):
            assert r.residual_score is not None
    # test fold is untouched and fully answered
    test_ids = {r.subject_id for r in records if r.fold == "test"}
    assert set(sealed) == test_ids and len(sealed) == cfg.n_test


def test_zero_missing_rate_fills_every_trainval_residual(tmp_path):
    _, records = cohort(tmp_path, missing_rate=0.0)
    records, _, _ = residualize(records)
    for r in records:
        if r.fold in ("train", "validation"):
            assert r.residual_score is not None


def test_residuals_do_not_leak_onto_test_records(tmp_path):
    _, records = cohort(tmp_path)
    records, sealed, _ = residualize(records)
    for r in records:
        if r.fold == "test":
            assert r.residual_score is None
            assert r.subject_id in sealed


def test_normalize_covariates_contracts(tmp_path):
    _, records = cohort(tmp_path)
    records, _, _ = residualize(records)
    scaler, transformed = normalize_covariates(records)
    train_mask = np.array([r.fold == "train" for r in records])
    train_z = transformed[train_mask]
    np.testing.assert_allclose(train_z.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(train_z.var(axis=0), 1.0, atol=1e-10)
    val_z = transformed[np.array([r.fold == "validation" for r in records])]
    assert np.abs(val_z.mean(axis=0)).max() > 1e-6  # train params, not val params


def test_normalize_constant_column_passes_through_centered():
    from voxboost.synth import SubjectRecord, DemographicCovariates

    records = []
    for i, v in enumerate([3, 3, 3]):
        records.append(SubjectRecord(
            subject_id=f"s{i}", fold="train", volume_path="",
            derived=np.array([v, i]), raw_score=0.0,
            demographics=DemographicCovariates(brain_volume=1.0)))
    scaler, transformed = normalize_covariates(records)
    np.testing.assert_array_equal(transformed[:, 0], 0.0)
    assert scaler.std[0] == 1.0


def test_manifest_round_trip_and_determinism(tmp_path):
    _, records = cohort(tmp_path, n_train=25, n_val=5, n_test=4, missing_rate=0.05, seed=2)
    records, sealed, _ = residualize(records)
    path = tmp_path / "manifest.csv"
    write_manifest(path, records)
    back = read_manifest(path)
    assert len(back) == len(records)
    for a, b in zip(records, back):
        assert a.subject_id == b.subject_id
        assert a.fold == b.fold
        assert a.volume_path == b.volume_path
        assert a.raw_score == b.raw_score
        assert (a.residual_score == b.residual_score
                or (a.fold == "test" and b.residual_score is None))
        np.testing.assert_array_equal(a.derived, b.derived)
        assert a.demographics == b.demographics
    write_manifest(tmp_path / "manifest2.csv", records)
    assert (tmp_path / "manifest2.csv").read_bytes() == path.read_bytes()

    answers_path = tmp_path / "answers.csv"
    write_sealed_answers(answers_path, sealed)
    assert read_sealed_answers(answers_path) == sealed
    assert len(read_sealed_answers(answers_path)) == 4


def test_design_columns_match_row_width():
    from voxboost.synth import DemographicCovariates

    demo = DemographicCovariates(brain_volume=100.0, site="site_b", age_months=120.0,
                                 sex="M", ethnicity="group_2", parental_education=3,
                                 parental_income=2, marital_status="single")
    assert len(design_row(demo)) == len(design_columns())
