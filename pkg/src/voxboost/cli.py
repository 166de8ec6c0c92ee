"""Command-line entry point.

Every pipeline stage is a subcommand that reads its inputs from the
working directory and persists its outputs there, so any stage can be
rerun in isolation; ``pipeline`` chains them all.  Outputs are
byte-reproducible given equal config and seeds; timestamps only ever go
to ``run.log``.

Exit codes: 0 success, 1 domain error (bad data, bad config), 2
environment error (I/O failures, missing upstream artifacts).
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .config import RunConfig, default_config_text
from .encoder import load_checkpoint, save_checkpoint
from .errors import MissingArtifactError, VoxboostError
from .gbm import GbmHyperparams, load_model, save_model
from .synth import (
    generate_cohort,
    read_manifest,
    residualize,
    write_manifest,
    write_sealed_answers,
)
from .tabular import fmt_real, read_rows, write_rows

# ---------------------------------------------------------------- paths


def manifest_path(workdir: Path) -> Path:
    return workdir / "cohort" / "manifest.csv"


def cohort_dir(workdir: Path) -> Path:
    return workdir / "cohort"


def sealed_path(workdir: Path) -> Path:
    return workdir / "sealed" / "test_answers.csv"


def checkpoint_path(workdir: Path) -> Path:
    return workdir / "encoder" / "checkpoint.vbenc"


def encoder_log_path(workdir: Path) -> Path:
    return workdir / "encoder" / "train_log.csv"


def features_path(workdir: Path, scale: int) -> Path:
    return workdir / "features" / f"features_scale{scale}.csv"


def grid_rows_path(workdir: Path) -> Path:
    return workdir / "gbm" / "grid_rows.csv"


def best_hp_path(workdir: Path) -> Path:
    return workdir / "gbm" / "best_hyperparams.cfg"


def gbm_model_path(workdir: Path) -> Path:
    return workdir / "gbm" / "model.gbm"


def predictions_path(workdir: Path, fold: str) -> Path:
    return workdir / "predictions" / f"{fold}_predictions.csv"


def report_dir(workdir: Path) -> Path:
    return workdir / "report"


def _log(workdir: Path, message: str) -> None:
    print(message)
    try:
        workdir.mkdir(parents=True, exist_ok=True)
        stamp = datetime.datetime.now().isoformat(timespec="seconds")
        with open(workdir / "run.log", "a", encoding="utf-8") as fh:
            fh.write(f"{stamp} {message}\n")
    except OSError:
        pass  # logging must never break a stage


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"missing {path}; run `voxboost {producer}` first")
    return path


def _read_records(workdir: Path):
    return read_manifest(_require(manifest_path(workdir), "synth"))


def _write_features_csv(path: Path, ids, features) -> None:
    header = ["subject_id"] + [f"f{j:04d}" for j in range(features.shape[1])]
    write_rows(path, header, [[sid] + [float(v) for v in row]
                              for sid, row in zip(ids, features)])


def _read_features_csv(path: Path):
    header, rows = read_rows(path)
    if not header or header[0] != "subject_id":
        raise VoxboostError(f"unexpected feature columns in {path}")
    ids = [r[0] for r in rows]
    feats = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    return ids, feats


# ---------------------------------------------------------------- stages


def cmd_synth(cfg: RunConfig) -> int:
    workdir = cfg.workdir
    cohort_cfg = cfg.cohort_config()
    records = generate_cohort(cohort_cfg, cohort_dir(workdir))
    records, sealed, _ = residualize(records)
    write_manifest(manifest_path(workdir), records)
    write_sealed_answers(sealed_path(workdir), sealed)
    counts = {}
    for r in records:
        counts[r.fold] = counts.get(r.fold, 0) + 1
    _log(workdir, f"synth: {len(records)} subjects "
                  f"(train {counts.get('train', 0)}, validation {counts.get('validation', 0)}, "
                  f"test {counts.get('test', 0)}, excluded {counts.get('excluded', 0)}) "
                  f"in {cohort_cfg.volume_size}^3 volumes")
    _log(workdir, f"synth: manifest at {manifest_path(workdir)}")
    return 0


def cmd_train_encoder(cfg: RunConfig) -> int:
    workdir = cfg.workdir
    records = _read_records(workdir)
    model, log = pl.stage_train_encoder(records, cohort_dir(workdir),
                                        cfg.encoder_config(), cfg.sgd_config(),
                                        dtype=cfg.encoder_dtype)
    save_checkpoint(model, checkpoint_path(workdir))
    write_rows(encoder_log_path(workdir), ["epoch", "train_mse", "val_mse"],
               [[s.epoch, s.train_mse, s.val_mse] for s in log])
    best = min(log, key=lambda s: (s.val_mse, s.epoch))
    _log(workdir, f"train-encoder: {len(log)} epochs, best epoch {best.epoch} "
                  f"(val covariate MSE {fmt_real(best.val_mse)})")
    return 0


def cmd_extract(cfg: RunConfig, scale: int | None = None) -> int:
    workdir = cfg.workdir
    scale = cfg.feature_scale if scale is None else scale
    records = _read_records(workdir)
    model = load_checkpoint(_require(checkpoint_path(workdir), "train-encoder"))
    usable = [r for r in records if r.fold in ("train", "validation", "test")]
    ids, feats = pl.stage_extract(model, usable, cohort_dir(workdir), scale=scale)
    _write_features_csv(features_path(workdir, scale), ids, feats)
    _log(workdir, f"extract: {feats.shape[0]} subjects x {feats.shape[1]} features "
                  f"at scale {scale}^3 -> {features_path(workdir, scale)}")
    return 0


def cmd_gridsearch(cfg: RunConfig) -> int:
    workdir = cfg.workdir
    records = _read_records(workdir)
    ids, feats = _read_features_csv(_require(features_path(workdir, cfg.feature_scale),
                                             "extract"))
    best_hp, rows = pl.stage_grid_search(feats, ids, records, cfg.grid_spec(),
                                         workers=cfg.workers)
    report = pl.ExperimentReport(chosen_hp=best_hp, grid_rows=rows,
                                 train_mse=float("nan"), val_mse=float("nan"))
    report.write_grid_csv(grid_rows_path(workdir))
    lines = [
        "# grid-search winner; parseable as config overrides",
        f"gbm.learning_rate = {fmt_real(best_hp.learning_rate)}",
        f"gbm.n_trees = {best_hp.n_trees}",
        f"gbm.max_depth = {best_hp.max_depth}",
        f"gbm.lambda = {fmt_real(best_hp.lam)}",
        f"gbm.alpha = {fmt_real(best_hp.alpha)}",
        f"gbm.subsample = {fmt_real(best_hp.subsample)}",
    ]
    best_hp_path(workdir).parent.mkdir(parents=True, exist_ok=True)
    best_hp_path(workdir).write_text("\n".join(lines) + "\n", encoding="utf-8")
    best_row = min(rows, key=lambda r: r.val_mse)
    _log(workdir, f"gridsearch: {len(rows)} configurations, best val MSE "
                  f"{fmt_real(best_row.val_mse)} -> {best_hp_path(workdir)}")
    return 0


def _load_hyperparams(cfg: RunConfig) -> GbmHyperparams:
    """Grid-search winner when available, config defaults otherwise."""
    path = best_hp_path(cfg.workdir)
    if path.exists():
        from .config import parse_config_text

        values = parse_config_text(path.read_text(encoding="utf-8"), str(path))
        cfg = cfg.with_overrides(**values)
    return cfg.gbm_hyperparams()


def cmd_train_gbm(cfg: RunConfig) -> int:
    workdir = cfg.workdir
    records = _read_records(workdir)
    ids, feats = _read_features_csv(_require(features_path(workdir, cfg.feature_scale),
                                             "extract"))
    hp = _load_hyperparams(cfg)
    model = pl.stage_train_gbm(feats, ids, records, hp)
    save_model(model, gbm_model_path(workdir))
    _log(workdir, f"train-gbm: {model.n_stages} stages on "
                  f"{model.n_features} features -> {gbm_model_path(workdir)}")
    return 0


def cmd_predict(cfg: RunConfig, fold: str) -> int:
    workdir = cfg.workdir
    records = _read_records(workdir)
    ids, feats = _read_features_csv(_require(features_path(workdir, cfg.feature_scale),
                                             "extract"))
    model = load_model(_require(gbm_model_path(workdir), "train-gbm"))
    fold_ids, preds = pl.stage_predict(model, feats, ids, records, fold)
    pl.write_predictions(predictions_path(workdir, fold), fold_ids, preds)
    _log(workdir, f"predict: {len(fold_ids)} {fold} subjects -> "
                  f"{predictions_path(workdir, fold)}")
    return 0


def cmd_score(predictions: str, answers: str) -> int:
    mse = pl.score_predictions(Path(predictions), Path(answers))
    print(f"MSE {fmt_real(mse)}")
    return 0


def _fold_mse_from_files(workdir: Path, records, fold: str) -> float:
    """Recompute a fold's MSE from its persisted predictions file."""
    ids, preds = pl.read_predictions(predictions_path(workdir, fold))
    residuals = {r.subject_id: r.residual_score for r in records if r.fold == fold}
    truth = np.array([residuals[sid] for sid in ids], dtype=np.float64)
    return pl.evaluate_mse(preds, truth)


def cmd_ablation(cfg: RunConfig) -> int:
    workdir = cfg.workdir
    records = _read_records(workdir)
    ids, feats = _read_features_csv(_require(features_path(workdir, cfg.feature_scale),
                                             "extract"))
    usable = [r for r in records if r.fold in ("train", "validation", "test")]
    grid = cfg.grid_spec()
    derived_ids, derived = pl.derived_matrix(usable)
    arm_a = pl.run_gbm_arm("derived+gbm", derived, derived_ids, usable, grid,
                           workers=cfg.workers)
    arm_b = pl.run_gbm_arm("cnn+gbm", feats, ids, usable, grid, workers=cfg.workers)
    rows = [(arm_a.name, arm_a.train_mse, arm_a.val_mse),
            (arm_b.name, arm_b.train_mse, arm_b.val_mse)]
    write_rows(report_dir(workdir) / "ablation.csv", ["method", "train_mse", "val_mse"],
               [[n, t, v] for n, t, v in rows])
    for name, tr, va in rows:
        _log(workdir, f"ablation: {name:12s} train MSE {fmt_real(tr)}  "
                      f"val MSE {fmt_real(va)}")
    return 0


def cmd_pipeline(cfg: RunConfig, compare_scales: bool = False) -> int:
    workdir = cfg.workdir
    cmd_synth(cfg)
    cmd_train_encoder(cfg)
    cmd_extract(cfg)
    cmd_gridsearch(cfg)
    cmd_train_gbm(cfg)
    for fold in ("train", "validation", "test"):
        cmd_predict(cfg, fold)

    records = _read_records(workdir)
    train_mse = _fold_mse_from_files(workdir, records, "train")
    val_mse = _fold_mse_from_files(workdir, records, "validation")
    # test truth is only ever touched by the standalone scoring step
    test_mse = pl.score_predictions(predictions_path(workdir, "test"), sealed_path(workdir))

    ids, feats = _read_features_csv(features_path(workdir, cfg.feature_scale))
    usable = [r for r in records if r.fold in ("train", "validation", "test")]
    grid = cfg.grid_spec()
    derived_ids, derived = pl.derived_matrix(usable)
    arm_a = pl.run_gbm_arm("derived+gbm", derived, derived_ids, usable, grid,
                           workers=cfg.workers)
    ablation = [(arm_a.name, arm_a.train_mse, arm_a.val_mse),
                ("cnn+gbm", train_mse, val_mse)]

    hp = _load_hyperparams(cfg)
    _, grid_rows_raw = read_rows(grid_rows_path(workdir))
    grid_rows = [pl.GridRow(stage=r[0], index=int(r[1]),
                            hp=GbmHyperparams(learning_rate=float(r[2]), n_trees=int(r[3]),
                                              max_depth=int(r[4]), lam=float(r[5]),
                                              alpha=float(r[6]), subsample=float(r[7])),
                            val_mse=float(r[8]))
                 for r in grid_rows_raw]

    scale_comparison = []
    if compare_scales:
        main_scale = cfg.feature_scale
        other = 3 if main_scale == 6 else 6
        cmd_extract(cfg, scale=other)
        other_ids, other_feats = _read_features_csv(features_path(workdir, other))
        best_other, _ = pl.stage_grid_search(other_feats, other_ids, records, grid,
                                             workers=cfg.workers)
        other_arm = pl.run_gbm_arm(f"cnn+gbm@{other}", other_feats, other_ids, usable,
                                   grid, workers=cfg.workers)
        scale_comparison = [(main_scale, val_mse), (other, other_arm.val_mse)]

    epoch_header, epoch_rows = read_rows(encoder_log_path(workdir))
    from .encoder import EpochStats

    encoder_log = [EpochStats(epoch=int(r[0]), train_mse=float(r[1]), val_mse=float(r[2]))
                   for r in epoch_rows]
    report = pl.ExperimentReport(chosen_hp=hp, grid_rows=grid_rows,
                                 train_mse=train_mse, val_mse=val_mse, test_mse=test_mse,
                                 ablation=ablation, encoder_log=encoder_log,
                                 feature_scale=cfg.feature_scale,
                                 scale_comparison=scale_comparison)
    rdir = report_dir(workdir)
    rdir.mkdir(parents=True, exist_ok=True)
    (rdir / "experiment_report.txt").write_text(report.to_text(), encoding="utf-8")
    report.write_grid_csv(rdir / "grid_rows.csv")
    report.write_ablation_csv(rdir / "ablation.csv")
    _log(workdir, f"pipeline: train MSE {fmt_real(train_mse)}, "
                  f"val MSE {fmt_real(val_mse)}, test MSE {fmt_real(test_mse)}")
    _log(workdir, f"pipeline: report at {rdir / 'experiment_report.txt'}")
    return 0


def cmd_print_config() -> int:
    sys.stdout.write(default_config_text())
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxboost",
        description="synthetic-cohort encoder + boosted-tree score regression pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="path to a section.key = value config file")
        p.add_argument("--workdir", help="working directory "
                       "(overrides config and VOXBOOST_WORKDIR)")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--workers", type=int, help="grid-search worker processes")

    for name, doc in [
        ("synth", "generate the synthetic cohort, manifest and sealed answers"),
        ("train-encoder", "train the volumetric encoder on covariate targets"),
        ("extract", "export encoder feature vectors for every subject"),
        ("gridsearch", "two-stage hyperparameter search on the train/validation folds"),
        ("train-gbm", "train the boosted-tree regressor with the winning hyperparameters"),
        ("predict", "write a predictions CSV for one fold"),
        ("ablation", "grid-search both arms: raw covariates vs encoder features"),
        ("pipeline", "run every stage end to end and write the experiment report"),
    ]:
        p = sub.add_parser(name, help=doc, description=doc)
        add_common(p)
        if name == "extract":
            p.add_argument("--scale", type=int, choices=(3, 6),
                           help="feature-map scale (default: encoder.feature_scale)")
        if name == "predict":
            p.add_argument("--fold", choices=("train", "validation", "test"),
                           default="test", help="which fold to predict (default test)")
        if name == "pipeline":
            p.add_argument("--compare-scales", action="store_true",
                           help="also evaluate the alternate feature scale")

    p = sub.add_parser("score", help="MSE of a predictions CSV against an answers CSV",
                       description="standalone scoring step; the only reader of test truth")
    p.add_argument("predictions", help="CSV with columns subject_id, prediction")
    p.add_argument("answers", help="CSV with columns subject_id, residual_score")

    sub.add_parser("print-config", help="print the default config with documentation",
                   description="print the default config; output parses back identically")
    return parser


def _load_run_config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    workdir = getattr(args, "workdir", None) or os.environ.get("VOXBOOST_WORKDIR")
    if workdir:
        overrides["paths.workdir"] = workdir
    return RunConfig.load(getattr(args, "config", None), overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "print-config":
            return cmd_print_config()
        if args.command == "score":
            return cmd_score(args.predictions, args.answers)
        cfg = _load_run_config(args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "train-encoder":
            return cmd_train_encoder(cfg)
        if args.command == "extract":
            return cmd_extract(cfg, scale=args.scale)
        if args.command == "gridsearch":
            return cmd_gridsearch(cfg)
        if args.command == "train-gbm":
            return cmd_train_gbm(cfg)
        if args.command == "predict":
            return cmd_predict(cfg, fold=args.fold)
        if args.command == "ablation":
            return cmd_ablation(cfg)
        if args.command == "pipeline":
            return cmd_pipeline(cfg, compare_scales=args.compare_scales)
        raise VoxboostError(f"unknown command {args.command!r}")
    except VoxboostError as err:
        print(f"voxboost: error: {err}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"voxboost: I/O error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
