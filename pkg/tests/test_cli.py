"""CLI subcommands: artifacts, exit codes, idempotence."""

import os
import stat
from pathlib import Path

import pytest

from voxboost.cli import main
from voxboost.config import RunConfig, default_config_text, parse_config_text
from voxboost.errors import ConfigError


def write_tiny_config(path: Path, workdir: Path, **extra) -> Path:
    lines = {
        "seed": 7,
        "paths.workdir": str(workdir),
        "cohort.n_train": 14,
        "cohort.n_val": 5,
        "cohort.n_test": 6,
        "cohort.volume_size": 24,
        "cohort.n_regions": 27,
        "cohort.missing_rate": 0.0,
        "encoder.channels": "4, 6",
        "encoder.epochs": 2,
        "gbm.n_trees": 15,
        "grid.learning_rates": "0.03, 0.1",
        "grid.n_trees": 15,
        "grid.max_depths": 2,
        "grid.fine_lr_factors": "0.8, 1.0",
        "grid.fine_depth_delta": 1,
    }
    lines.update(extra)
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()), encoding="utf-8")
    return path


@pytest.mark.parametrize("command", [
    "synth", "train-encoder", "extract", "gridsearch", "train-gbm",
    "predict", "score", "ablation", "pipeline", "print-config",
])
def test_every_subcommand_documents_itself(command, capsys):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "--help" in out
    if command not in ("score", "print-config"):
        for flag in ("--config", "--workdir", "--seed", "--workers"):
            assert flag in out


def test_print_config_round_trips(capsys):
    assert main(["print-config"]) == 0
    out = capsys.readouterr().out
    parsed = parse_config_text(out)
    assert parsed == {k: v for k, v in RunConfig.defaults().values}
    assert out == default_config_text()


def test_unknown_config_keys_are_listed():
    text = "seed = 1\ncohort.n_trian = 5\ngbm.learning_rte = 0.1\n"
    with pytest.raises(ConfigError) as err:
        parse_config_text(text)
    assert "cohort.n_trian" in str(err.value)
    assert "gbm.learning_rte" in str(err.value)


def test_cli_reports_config_error_with_exit_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("not_a_key = 1\n")
    assert main(["synth", "--config", str(cfg)]) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_wide_preset_expands_grid(tmp_path):
    cfg_path = tmp_path / "wide.cfg"
    cfg_path.write_text("grid.preset = wide\n")
    cfg = RunConfig.load(cfg_path)
    assert len(cfg.grid_spec().coarse_configs()) == 180
    # explicit keys still override the preset
    cfg_path.write_text("grid.preset = wide\ngrid.n_trees = 10\n")
    cfg = RunConfig.load(cfg_path)
    assert cfg.grid_spec().n_trees == (10,)


def test_score_subcommand_fixtures(tmp_path, capsys):
    p = tmp_path / "preds.csv"
    a = tmp_path / "answers.csv"
    p.write_text("subject_id,prediction\ns1,1\ns2,3\n")
    a.write_text("subject_id,residual_score\ns1,0\ns2,0\n")
    assert main(["score", str(p), str(p.with_suffix(".csv"))]) == 0
    assert "MSE 0" in capsys.readouterr().out
    assert main(["score", str(p), str(a)]) == 0
    assert "MSE 5" in capsys.readouterr().out


def test_missing_upstream_artifact_exits_2(tmp_path, capsys):
    cfg = write_tiny_config(tmp_path / "t.cfg", tmp_path / "run")
    assert main(["extract", "--config", str(cfg)]) == 2
    assert "missing" in capsys.readouterr().err


def test_unwritable_workdir_exits_2(tmp_path):
    if os.geteuid() == 0:
        # root ignores mode bits; a read-only kernel filesystem still refuses
        target = Path("/proc/voxboost_denied/run")
    else:
        locked = tmp_path / "locked"
        locked.mkdir()
        locked.chmod(stat.S_IRUSR | stat.S_IXUSR)
        target = locked / "run"
    cfg = write_tiny_config(tmp_path / "t.cfg", target)
    assert main(["synth", "--config", str(cfg)]) == 2


def test_synth_manifest_counts_and_idempotence(tmp_path):
    cfg = write_tiny_config(tmp_path / "t.cfg", tmp_path / "run")
    assert main(["synth", "--config", str(cfg)]) == 0
    manifest = tmp_path / "run" / "cohort" / "manifest.csv"
    rows = manifest.read_text().splitlines()
    assert len(rows) == 1 + 25
    sealed = (tmp_path / "run" / "sealed" / "test_answers.csv").read_text().splitlines()
    assert len(sealed) == 1 + 6

    before = manifest.read_bytes()
    assert main(["synth", "--config", str(cfg)]) == 0
    assert manifest.read_bytes() == before


def test_workdir_precedence_env_and_flag(tmp_path, monkeypatch):
    cfg = write_tiny_config(tmp_path / "t.cfg", tmp_path / "from_config")
    monkeypatch.setenv("VOXBOOST_WORKDIR", str(tmp_path / "from_env"))
    assert main(["synth", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_env" / "cohort" / "manifest.csv").exists()
    assert not (tmp_path / "from_config").exists()
    assert main(["synth", "--config", str(cfg), "--workdir",
                 str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "cohort" / "manifest.csv").exists()


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    """One full tiny pipeline shared by the stage-output assertions."""
    root = tmp_path_factory.mktemp("tiny_pipeline")
    cfg = write_tiny_config(root / "t.cfg", root / "run")
    assert main(["pipeline", "--config", str(cfg)]) == 0
    return root


def test_pipeline_writes_report_and_predictions(tiny_run):
    run = tiny_run / "run"
    report = (run / "report" / "experiment_report.txt").read_text()
    assert "train MSE" in report and "ablation" in report
    ablation = (run / "report" / "ablation.csv").read_text().splitlines()
    assert len(ablation) == 3  # header + two methods
    assert ablation[1].startswith("derived+gbm,")
    assert ablation[2].startswith("cnn+gbm,")
    for fold, n in (("train", 14), ("validation", 5), ("test", 6)):
        lines = (run / "predictions" / f"{fold}_predictions.csv").read_text().splitlines()
        assert len(lines) == 1 + n


def test_predict_row_count_matches_fold(tiny_run):
    cfg = tiny_run / "t.cfg"
    assert main(["predict", "--config", str(cfg), "--fold", "validation"]) == 0
    lines = (tiny_run / "run" / "predictions" / "validation_predictions.csv") \
        .read_text().splitlines()
    assert len(lines) == 1 + 5


def test_extract_scale3_feature_width(tiny_run):
    cfg = tiny_run / "t.cfg"
    assert main(["extract", "--config", str(cfg), "--scale", "3"]) == 0
    header = (tiny_run / "run" / "features" / "features_scale3.csv") \
        .read_text().splitlines()[0]
    assert len(header.split(",")) == 1 + 6 * 27  # id + channels x 3^3


def test_gridsearch_winner_file_parses_as_config(tiny_run):
    text = (tiny_run / "run" / "gbm" / "best_hyperparams.cfg").read_text()
    values = parse_config_text(text)
    assert set(values) == {"gbm.learning_rate", "gbm.n_trees", "gbm.max_depth",
                           "gbm.lambda", "gbm.alpha", "gbm.subsample"}


def test_grid_rows_log_covers_both_stages(tiny_run):
    rows = (tiny_run / "run" / "gbm" / "grid_rows.csv").read_text().splitlines()
    stages = {line.split(",")[0] for line in rows[1:]}
    assert stages == {"coarse", "fine"}
    # winner is a true argmin over the log
    mses = [float(line.split(",")[-1]) for line in rows[1:]]
    from voxboost.tabular import read_rows

    _, best_cfg_rows = read_rows(tiny_run / "run" / "gbm" / "grid_rows.csv")
    assert min(mses) == min(float(r[-1]) for r in best_cfg_rows)


def test_stage_rerun_is_idempotent(tiny_run):
    cfg = tiny_run / "t.cfg"
    model_file = tiny_run / "run" / "gbm" / "model.gbm"
    before = model_file.read_bytes()
    assert main(["train-gbm", "--config", str(cfg)]) == 0
    assert model_file.read_bytes() == before
