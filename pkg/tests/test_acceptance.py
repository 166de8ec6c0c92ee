"""Acceptance suite: one test per numbered criterion, each time-bounded.

Criterion 7 runs the full default-scale pipeline for five seeds and is by
far the slowest part of the whole test suite (tens of minutes on a small
machine); everything else finishes in seconds.  A per-criterion PASS/FAIL
summary prints at the end of the pytest run.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from voxboost.cli import main
from voxboost.encoder import (
    Conv3dLayer,
    EncoderConfig,
    SgdMomentumConfig,
    conv3d_backward,
    conv3d_forward,
    extract_features,
    forward,
    init_encoder,
    maxpool3d_backward,
    maxpool3d_forward,
    mse_multi_loss,
    relu_backward,
    relu_forward,
    train,
)
from voxboost.gbm import GbmHyperparams, fit, fit_tree, leaf_value, line_search_rho, staged_predict
from voxboost.synth import (
    CohortConfig,
    design_row,
    generate_cohort,
    linear_score_part,
    orthogonality_report,
    residualize,
)
from voxboost.tabular import read_rows

from oracles import (
    central_difference_grad,
    minimize_leaf_objective,
    minimize_rho_objective,
    rel_err,
)
from test_gbm_trees import walk_and_compare


@pytest.mark.acceptance("1 closed-form oracle equivalence")
def test_acceptance_1_closed_forms():
    t0 = time.time()
    rng = np.random.default_rng(1001)
    lam_pool = [0.0, 1.05, 0.3, 2.5]
    alpha_pool = [0.0, 0.1, 0.5, 1.5]
    for case in range(1000):
        n = int(rng.integers(1, 16))
        g = rng.normal(scale=float(rng.uniform(0.2, 5.0)), size=n)
        # the reported penalty setting appears in a quarter of the cases
        if case % 4 == 0:
            lam, alpha = 1.05, 0.1
        else:
            lam = float(rng.choice(lam_pool))
            alpha = float(rng.choice(alpha_pool))
        w = leaf_value(g, lam, alpha)
        assert abs(w - minimize_leaf_objective(g, lam, alpha)) < 1e-8

        f = rng.normal(size=n)
        r = rng.normal(scale=2.0, size=n)
        rho = line_search_rho(r, f, lam, alpha)
        assert abs(rho - minimize_rho_objective(r, f, lam, alpha)) < 1e-8
    assert time.time() - t0 < 10.0


@pytest.mark.acceptance("2 split-search oracle equivalence")
def test_acceptance_2_split_search():
    t0 = time.time()
    rng = np.random.default_rng(2002)
    for case in range(100):
        n = int(rng.integers(4, 65))
        m = int(rng.integers(1, 6))
        X = rng.normal(size=(n, m))
        if case % 4 == 0:  # discretized features to exercise tied values
            X = np.round(X * 2.0) / 2.0
        g = rng.normal(size=n)
        lam = float(rng.choice([0.0, 1.05]))
        alpha = float(rng.choice([0.0, 0.1]))
        depth = int(rng.integers(1, 3))
        tree = fit_tree(X, g, np.arange(n), depth, lam, alpha)
        walk_and_compare(tree, X, g, lam, alpha, 0, np.arange(n), 0, depth)
    assert time.time() - t0 < 30.0


@pytest.mark.acceptance("3 boosting monotonicity")
def test_acceptance_3_monotonicity():
    t0 = time.time()
    rng = np.random.default_rng(3003)
    for _ in range(20):
        n = int(rng.integers(20, 80))
        m = int(rng.integers(2, 6))
        X = rng.normal(size=(n, m))
        y = X[:, 0] + np.sin(2.0 * X[:, 1]) + 0.3 * rng.normal(size=n)
        hp = GbmHyperparams(learning_rate=float(rng.uniform(0.02, 1.0)),
                            n_trees=60, max_depth=int(rng.integers(1, 4)),
                            lam=0.0, alpha=0.0, subsample=1.0,
                            seed=int(rng.integers(0, 2 ** 31)))
        model = fit(X, y, hp)
        mses = [float(np.mean((y - s) ** 2)) for s in staged_predict(model, X)]
        assert all(a >= b - 1e-12 for a, b in zip(mses, mses[1:]))
    assert time.time() - t0 < 30.0


@pytest.mark.acceptance("4 gradient checks")
def test_acceptance_4_gradient_checks():
    t0 = time.time()
    rng = np.random.default_rng(4004)
    eps, tol = 1e-5, 1e-4

    # conv3d at the stated maximum size: batch 2, 4 channels, 8^3 space
    x = rng.normal(size=(2, 4, 8, 8, 8))
    layer = Conv3dLayer(kernel=rng.normal(size=(3, 4, 3, 3, 3)),
                        bias=rng.normal(size=3), padding=1)
    R = rng.normal(size=(2, 3, 8, 8, 8))
    gi, gk, gb = conv3d_backward(R, x, layer)
    probe = rng.choice(x.size, size=120, replace=False)
    fd = central_difference_grad(lambda v: float(np.sum(conv3d_forward(v, layer) * R)),
                                 x, eps=eps, indices=probe)
    for i, want in fd.items():
        assert rel_err(gi.ravel()[i], want) < tol
    probe_k = rng.choice(layer.kernel.size, size=120, replace=False)

    def loss_wrt_kernel(kern):
        return float(np.sum(conv3d_forward(x, Conv3dLayer(kern, layer.bias, 1)) * R))

    fd = central_difference_grad(loss_wrt_kernel, layer.kernel.copy(), eps=eps,
                                 indices=probe_k)
    for i, want in fd.items():
        assert rel_err(gk.ravel()[i], want) < tol

    def loss_wrt_bias(bias):
        return float(np.sum(conv3d_forward(x, Conv3dLayer(layer.kernel, bias, 1)) * R))

    fd = central_difference_grad(loss_wrt_bias, layer.bias.copy(), eps=eps)
    for i, want in fd.items():
        assert rel_err(gb.ravel()[i], want) < tol

    # max pooling on a tie-free tensor
    xp = rng.permutation(2 * 4 * 8 ** 3).astype(np.float64).reshape(2, 4, 8, 8, 8)
    out, idx = maxpool3d_forward(xp)
    Rp = rng.normal(size=out.shape)
    gp = maxpool3d_backward(Rp, idx)
    probe = rng.choice(xp.size, size=160, replace=False)
    fd = central_difference_grad(lambda v: float(np.sum(maxpool3d_forward(v)[0] * Rp)),
                                 xp, eps=1e-3, indices=probe)  # integer-separated values
    for i, want in fd.items():
        assert rel_err(gp.ravel()[i], want) < tol

    # relu away from the kink
    xr = rng.normal(size=512)
    xr[np.abs(xr) < 1e-3] = 0.25
    Rr = rng.normal(size=512)
    ga = relu_backward(Rr, xr)
    probe = rng.choice(512, size=128, replace=False)
    fd = central_difference_grad(lambda v: float(np.sum(relu_forward(v) * Rr)),
                                 xr, eps=eps, indices=probe)
    for i, want in fd.items():
        assert rel_err(ga[i], want) < tol

    # loss wrt predictions
    p = rng.normal(size=(2, 123))
    t = rng.normal(size=(2, 123))
    _, grad = mse_multi_loss(p, t)
    probe = rng.choice(p.size, size=100, replace=False)
    fd = central_difference_grad(lambda v: mse_multi_loss(v, t)[0], p, eps=eps,
                                 indices=probe)
    for i, want in fd.items():
        assert rel_err(grad.ravel()[i], want) < tol

    assert time.time() - t0 < 60.0


@pytest.mark.acceptance("5 encoder contract and memorization")
def test_acceptance_5_encoder_contract():
    t0 = time.time()
    rng = np.random.default_rng(5005)
    for size, schedule in ((24, (8, 16)), (48, (8, 16, 32))):
        cfg = EncoderConfig(input_size=size, channel_schedule=schedule, head_outputs=123)
        model = init_encoder(cfg, seed=1, dtype=np.float32)
        vol = rng.normal(size=(2, size, size, size)).astype(np.float32)
        preds, _ = forward(model, vol)
        assert preds.shape == (123,)
        feats = extract_features(model, vol, scale=6)
        assert feats.shape == (schedule[-1] * 216,)

    # single-sample memorization within 200 epochs of SGD, momentum 0.9
    cfg = EncoderConfig(input_size=12, channel_schedule=(4,), head_outputs=5)
    model = init_encoder(cfg, seed=2, dtype=np.float64)
    vols = rng.normal(size=(1, 2, 12, 12, 12))
    targets = rng.normal(size=(1, 5))
    preds, _ = forward(model, vols)
    initial, _ = mse_multi_loss(preds, targets)
    sgd = SgdMomentumConfig(learning_rate=0.01, momentum=0.9, batch_size=1,
                            epochs=200, seed=0)
    best, _ = train(model, (vols, targets), (vols, targets), sgd)
    preds, _ = forward(best, vols)
    final, _ = mse_multi_loss(preds, targets)
    assert final < 0.1 * initial
    assert time.time() - t0 < 180.0


@pytest.mark.acceptance("6 residualization")
def test_acceptance_6_residualization(tmp_path):
    t0 = time.time()
    cfg = CohortConfig(n_train=60, n_val=15, n_test=10, volume_size=24, n_regions=27,
                       noise_level=1.0, missing_rate=0.08, seed=66)
    records = generate_cohort(cfg, tmp_path / "a")
    incomplete = {r.subject_id for r in records
                  if r.fold in ("train", "validation") and r.demographics.has_missing()}
    assert incomplete
    records, _, _ = residualize(records)
    rows = [r for r in records if r.fold in ("train", "validation")]
    design = np.array([design_row(r.demographics) for r in rows])
    res = np.array([r.residual_score for r in rows])
    assert orthogonality_report(design, res) < 1e-6
    for r in records:
        assert (r.fold == "excluded") == (r.subject_id in incomplete)

    # exactly-linear scores leave residuals at the solver floor
    cfg = CohortConfig(n_train=40, n_val=10, n_test=5, volume_size=24, n_regions=27,
                       noise_level=0.0, missing_rate=0.0, nonlinear_strength=0.0, seed=67)
    records = generate_cohort(cfg, tmp_path / "b")
    for r in records:
        assert r.raw_score == linear_score_part(r.demographics)
    records, sealed, _ = residualize(records)
    for r in records:
        if r.fold in ("train", "validation"):
            assert abs(r.residual_score) < 1e-6
    assert all(abs(v) < 1e-6 for v in sealed.values())
    assert time.time() - t0 < 5.0


def _report_mses(workdir: Path) -> tuple[float, float, float]:
    text = (workdir / "report" / "experiment_report.txt").read_text()
    vals = {}
    for line in text.splitlines():
        for key, label in (("train", "train MSE"), ("val", "validation MSE"),
                           ("test", "test MSE")):
            if line.startswith(label):
                vals[key] = float(line.split(":")[1])
    return vals["train"], vals["val"], vals["test"]


@pytest.mark.acceptance("7 end-to-end desk-scale protocol")
def test_acceptance_7_end_to_end(tmp_path):
    # the 15-minute budget is stated for a 4-core desktop; scale it for
    # smaller machines (a single-core box gets 4x the wall-clock budget)
    import os

    cores = os.cpu_count() or 1
    budget = 900.0 * max(1.0, 4.0 / cores)

    seeds = (17, 18, 19, 20, 21)
    gaps = []
    orderings = []
    for seed in seeds:
        workdir = tmp_path / f"run_{seed}"
        t0 = time.time()
        assert main(["pipeline", "--workdir", str(workdir), "--seed", str(seed)]) == 0
        elapsed = time.time() - t0
        if seed == seeds[0]:
            assert elapsed < budget, \
                f"default pipeline took {elapsed:.0f}s (budget {budget:.0f}s on {cores} cores)"

        train_mse, val_mse, test_mse = _report_mses(workdir)
        assert np.isfinite([train_mse, val_mse, test_mse]).all()
        gaps.append(train_mse < val_mse)

        if seed == seeds[0]:
            # default 200/40/100 cohort: manifest keeps every subject row
            _, manifest_rows = read_rows(workdir / "cohort" / "manifest.csv")
            assert len(manifest_rows) == 340
            # reported MSEs recompute exactly from the persisted predictions
            from voxboost.cli import _fold_mse_from_files, _read_records

            records = _read_records(workdir)
            assert _fold_mse_from_files(workdir, records, "train") == train_mse
            assert _fold_mse_from_files(workdir, records, "validation") == val_mse

        header, rows = read_rows(workdir / "report" / "ablation.csv")
        assert header == ["method", "train_mse", "val_mse"]
        assert [r[0] for r in rows] == ["derived+gbm", "cnn+gbm"]
        assert all(np.isfinite(float(v)) for r in rows for v in r[1:])
        orderings.append((seed, float(rows[1][2]), float(rows[0][2])))

    # informative, not asserted: how often encoder features beat raw covariates
    for seed, cnn_val, derived_val in orderings:
        verdict = "cnn<=derived" if cnn_val <= derived_val else "derived<cnn"
        print(f"seed {seed}: cnn+gbm val {cnn_val:.4f} vs derived+gbm val "
              f"{derived_val:.4f} -> {verdict}")
    assert sum(gaps) >= 4, f"train<val gap seen in only {sum(gaps)}/5 seeds"


@pytest.mark.acceptance("8 pipeline determinism")
def test_acceptance_8_determinism(tmp_path):
    # full pipeline, twice, identical config/seed: byte-identical artifacts.
    # reduced scale keeps the double run tractable; every stage still runs.
    cfg_text = "\n".join([
        "seed = 23",
        "cohort.n_train = 16",
        "cohort.n_val = 6",
        "cohort.n_test = 6",
        "cohort.volume_size = 24",
        "cohort.n_regions = 27",
        "encoder.channels = 4, 6",
        "encoder.epochs = 2",
        "grid.learning_rates = 0.03, 0.1",
        "grid.n_trees = 12",
        "grid.max_depths = 2",
        "grid.fine_lr_factors = 0.8, 1.0",
        "grid.fine_depth_delta = 1",
    ]) + "\n"
    cfg_path = tmp_path / "det.cfg"
    cfg_path.write_text(cfg_text)
    outs = []
    for run in ("one", "two"):
        workdir = tmp_path / run
        assert main(["pipeline", "--config", str(cfg_path),
                     "--workdir", str(workdir)]) == 0
        artifacts = {}
        for rel in ["gbm/model.gbm", "encoder/checkpoint.vbenc",
                    "predictions/train_predictions.csv",
                    "predictions/validation_predictions.csv",
                    "predictions/test_predictions.csv",
                    "cohort/manifest.csv", "report/experiment_report.txt"]:
            artifacts[rel] = (workdir / rel).read_bytes()
        outs.append(artifacts)
    for rel in outs[0]:
        assert outs[0][rel] == outs[1][rel], f"{rel} differs between identical runs"


@pytest.mark.acceptance("9 scoring tool")
def test_acceptance_9_scoring(tmp_path, capsys):
    preds = tmp_path / "preds.csv"
    answers = tmp_path / "answers.csv"
    preds.write_text("subject_id,prediction\ns1,1\ns2,3\n")
    answers.write_text("subject_id,residual_score\ns1,0\ns2,0\n")

    assert main(["score", str(preds), str(preds)]) == 0
    assert capsys.readouterr().out.strip() == "MSE 0"
    assert main(["score", str(preds), str(answers)]) == 0
    assert capsys.readouterr().out.strip() == "MSE 5"
