"""End-to-end experiment stages and reports.

``run_cnn_gbm`` is the image arm: train the encoder on the train+test
folds against z-scored covariate targets (validation fold picks the best
epoch), extract flattened feature maps for every subject, grid-search the
regressor on train-vs-validation residuals, refit the winner on the train
fold, and predict every fold.  Test predictions come back as a file-ready
(ids, values) pair -- scoring them against sealed answers is the caller's
job, through the standalone scoring step, so no training code path ever
sees test truth.

``run_ablation`` adds the covariate arm: the same grid protocol applied
directly to the derived covariates, mirroring the image-vs-derived
comparison table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..encoder import (
    EncoderConfig,
    EncoderModel,
    EpochStats,
    SgdMomentumConfig,
    extract_features_batch,
    init_encoder,
    train,
)
from ..errors import InvalidInputError
from ..gbm import GbmHyperparams, GbmModel, fit, predict
from ..synth import SubjectRecord, load_cohort_volumes, normalize_covariates
from ..tabular import fmt_real, write_rows
from .grid import GridRow, GridSpec, two_stage_grid_search
from .scoring import evaluate_mse

_EXTRACT_BATCH = 8


def fold_records(records: list[SubjectRecord], fold: str) -> list[SubjectRecord]:
    return [r for r in records if r.fold == fold]


def residual_vector(records: list[SubjectRecord]) -> np.ndarray:
    vals = []
    for r in records:
        if r.residual_score is None:
            raise InvalidInputError(
                f"{r.subject_id} has no residual score; run residualization first")
        vals.append(r.residual_score)
    return np.array(vals, dtype=np.float64)


def stage_train_encoder(records: list[SubjectRecord], cohort_dir: str | Path,
                        enc_cfg: EncoderConfig, sgd_cfg: SgdMomentumConfig,
                        dtype=np.float32):
    """Train on train+test volumes (covariate targets), validate on validation."""
    _, targets_z = normalize_covariates(records)
    by_fold = {f: [i for i, r in enumerate(records) if r.fold == f]
               for f in ("train", "validation", "test")}
    train_idx = by_fold["train"] + by_fold["test"]
    val_idx = by_fold["validation"]
    if not train_idx or not val_idx:
        raise InvalidInputError("encoder training requires train/test and validation folds")

    cohort_dir = Path(cohort_dir)
    train_records = [records[i] for i in train_idx]
    val_records = [records[i] for i in val_idx]
    train_vols = load_cohort_volumes(train_records, cohort_dir, dtype=dtype)
    val_vols = load_cohort_volumes(val_records, cohort_dir, dtype=dtype)
    model = init_encoder(enc_cfg, seed=sgd_cfg.seed, dtype=dtype)
    best_model, log = train(model, (train_vols, targets_z[train_idx]),
                            (val_vols, targets_z[val_idx]), sgd_cfg)
    return best_model, log


def stage_extract(model: EncoderModel, records: list[SubjectRecord],
                  cohort_dir: str | Path, scale: int = 6):
    """(subject ids, feature matrix) for every record, in record order."""
    cohort_dir = Path(cohort_dir)
    ids = [r.subject_id for r in records]
    chunks = []
    for lo in range(0, len(records), _EXTRACT_BATCH):
        batch = records[lo:lo + _EXTRACT_BATCH]
        vols = load_cohort_volumes(batch, cohort_dir, dtype=model.dtype)
        chunks.append(extract_features_batch(model, vols, scale=scale))
    return ids, np.vstack(chunks)


def _fold_matrix(features: np.ndarray, ids: list[str],
                 records: list[SubjectRecord], fold: str):
    index = {sid: i for i, sid in enumerate(ids)}
    rows = fold_records(records, fold)
    missing = [r.subject_id for r in rows if r.subject_id not in index]
    if missing:
        raise InvalidInputError(
            f"features missing for {len(missing)} {fold} subjects (first: {missing[:3]})")
    X = features[[index[r.subject_id] for r in rows]]
    return rows, X


def stage_grid_search(features: np.ndarray, ids: list[str],
                      records: list[SubjectRecord], grid: GridSpec,
                      workers: int = 1):
    train_rows, X_train = _fold_matrix(features, ids, records, "train")
    val_rows, X_val = _fold_matrix(features, ids, records, "validation")
    return two_stage_grid_search(X_train, residual_vector(train_rows),
                                 X_val, residual_vector(val_rows), grid, workers)


def stage_train_gbm(features: np.ndarray, ids: list[str],
                    records: list[SubjectRecord], hp: GbmHyperparams) -> GbmModel:
    train_rows, X_train = _fold_matrix(features, ids, records, "train")
    return fit(X_train, residual_vector(train_rows), hp)


def stage_predict(model: GbmModel, features: np.ndarray, ids: list[str],
                  records: list[SubjectRecord], fold: str):
    rows, X = _fold_matrix(features, ids, records, fold)
    return [r.subject_id for r in rows], predict(model, X)


@dataclass
class ArmResult:
    """One regression arm (cnn features or raw derived covariates)."""

    name: str
    chosen_hp: GbmHyperparams
    grid_rows: list[GridRow]
    gbm_model: GbmModel
    train_mse: float
    val_mse: float
    predictions: dict[str, tuple[list[str], np.ndarray]]  # fold -> (ids, values)


def run_gbm_arm(name: str, features: np.ndarray, ids: list[str],
                records: list[SubjectRecord], grid: GridSpec,
                workers: int = 1) -> ArmResult:
    """Grid-search, refit winner on train, predict every fold."""
    best_hp, rows = stage_grid_search(features, ids, records, grid, workers)
    model = stage_train_gbm(features, ids, records, best_hp)
    predictions = {}
    for fold in ("train", "validation", "test"):
        if fold_records(records, fold):
            predictions[fold] = stage_predict(model, features, ids, records, fold)
    train_rows, _ = _fold_matrix(features, ids, records, "train")
    val_rows, _ = _fold_matrix(features, ids, records, "validation")
    train_mse = evaluate_mse(predictions["train"][1], residual_vector(train_rows))
    val_mse = evaluate_mse(predictions["validation"][1], residual_vector(val_rows))
    return ArmResult(name=name, chosen_hp=best_hp, grid_rows=rows, gbm_model=model,
                     train_mse=train_mse, val_mse=val_mse, predictions=predictions)


@dataclass
class CnnGbmResult:
    encoder_model: EncoderModel
    encoder_log: list[EpochStats]
    feature_scale: int
    ids: list[str]
    features: np.ndarray
    arm: ArmResult


def run_cnn_gbm(records: list[SubjectRecord], cohort_dir: str | Path,
                enc_cfg: EncoderConfig, sgd_cfg: SgdMomentumConfig,
                grid: GridSpec, feature_scale: int = 6, dtype=np.float32,
                workers: int = 1) -> CnnGbmResult:
    encoder_model, log = stage_train_encoder(records, cohort_dir, enc_cfg, sgd_cfg, dtype)
    usable = [r for r in records if r.fold in ("train", "validation", "test")]
    ids, features = stage_extract(encoder_model, usable, cohort_dir, feature_scale)
    arm = run_gbm_arm("cnn+gbm", features, ids, usable, grid, workers)
    return CnnGbmResult(encoder_model=encoder_model, encoder_log=log,
                        feature_scale=feature_scale, ids=ids, features=features, arm=arm)


def derived_matrix(records: list[SubjectRecord]):
    ids = [r.subject_id for r in records]
    return ids, np.array([r.derived for r in records], dtype=np.float64)


def run_ablation(records: list[SubjectRecord], cohort_dir: str | Path,
                 enc_cfg: EncoderConfig, sgd_cfg: SgdMomentumConfig,
                 grid: GridSpec, feature_scale: int = 6, dtype=np.float32,
                 workers: int = 1, cnn_result: CnnGbmResult | None = None):
    """(derived-covariate arm, cnn arm); reuses a prior cnn run when given."""
    usable = [r for r in records if r.fold in ("train", "validation", "test")]
    ids, derived = derived_matrix(usable)
    derived_arm = run_gbm_arm("derived+gbm", derived, ids, usable, grid, workers)
    if cnn_result is None:
        cnn_result = run_cnn_gbm(records, cohort_dir, enc_cfg, sgd_cfg, grid,
                                 feature_scale, dtype, workers)
    return derived_arm, cnn_result


@dataclass
class ExperimentReport:
    chosen_hp: GbmHyperparams
    grid_rows: list[GridRow]
    train_mse: float
    val_mse: float
    test_mse: float | None = None
    ablation: list[tuple[str, float, float]] = field(default_factory=list)
    encoder_log: list[EpochStats] = field(default_factory=list)
    feature_scale: int = 6
    scale_comparison: list[tuple[int, float]] = field(default_factory=list)

    def grid_rows_table(self):
        header = ["stage", "index", "learning_rate", "n_trees", "max_depth",
                  "lambda", "alpha", "subsample", "val_mse"]
        rows = [[r.stage, r.index, r.hp.learning_rate, r.hp.n_trees, r.hp.max_depth,
                 r.hp.lam, r.hp.alpha, r.hp.subsample, r.val_mse]
                for r in self.grid_rows]
        return header, rows

    def write_grid_csv(self, path: str | Path) -> None:
        header, rows = self.grid_rows_table()
        write_rows(path, header, rows)

    def write_ablation_csv(self, path: str | Path) -> None:
        write_rows(path, ["method", "train_mse", "val_mse"],
                   [[name, tr, va] for name, tr, va in self.ablation])

    def to_text(self) -> str:
        hp = self.chosen_hp
        lines = [
            "experiment report",
            "=================",
            f"feature scale        : {self.feature_scale}^3",
            f"grid evaluations     : {len(self.grid_rows)}",
            (f"chosen hyperparams   : learning_rate={fmt_real(hp.learning_rate)} "
             f"n_trees={hp.n_trees} max_depth={hp.max_depth} "
             f"lambda={fmt_real(hp.lam)} alpha={fmt_real(hp.alpha)} "
             f"subsample={fmt_real(hp.subsample)}"),
            f"train MSE            : {fmt_real(self.train_mse)}",
            f"validation MSE       : {fmt_real(self.val_mse)}",
            f"test MSE             : "
            + (fmt_real(self.test_mse) if self.test_mse is not None else "not scored"),
        ]
        if self.encoder_log:
            best = min(self.encoder_log, key=lambda s: (s.val_mse, s.epoch))
            lines.append(f"encoder best epoch   : {best.epoch} "
                         f"(val covariate MSE {fmt_real(best.val_mse)})")
        if self.scale_comparison:
            lines.append("")
            lines.append("feature-scale comparison (validation MSE)")
            for scale, mse in self.scale_comparison:
                lines.append(f"  {scale}^3 : {fmt_real(mse)}")
        if self.ablation:
            lines.append("")
            lines.append("ablation (method, train MSE, validation MSE)")
            for name, tr, va in self.ablation:
                lines.append(f"  {name:12s} {fmt_real(tr):>22s} {fmt_real(va):>22s}")
        return "\n".join(lines) + "\n"
