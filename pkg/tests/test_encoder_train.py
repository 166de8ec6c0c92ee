"""Training loop: determinism, best-epoch selection, memorization."""

import numpy as np
import pytest

from voxboost.encoder import (
    EncoderConfig,
    SgdMomentumConfig,
    forward,
    init_encoder,
    mse_multi_loss,
    train,
)
from voxboost.errors import InvalidInputError


def make_data(n, size=12, k=5, seed=0):
    rng = np.random.default_rng(seed)
    vols = rng.normal(size=(n, 2, size, size, size)).astype(np.float64)
    targets = rng.normal(size=(n, k))
    return vols, targets


def tiny_model(seed=0):
    cfg = EncoderConfig(input_size=12, channel_schedule=(4,), head_outputs=5)
    return init_encoder(cfg, seed=seed, dtype=np.float64)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        SgdMomentumConfig(learning_rate=0.0)
    with pytest.raises(InvalidInputError):
        SgdMomentumConfig(momentum=1.0)
    with pytest.raises(InvalidInputError):
        SgdMomentumConfig(batch_size=0)


def test_zero_epochs_returns_model_unchanged():
    model = tiny_model()
    before = [l.kernel.copy() for l in model.layers if hasattr(l, "kernel")]
    data = make_data(3)
    out, log = train(model, data, data, SgdMomentumConfig(epochs=0))
    assert out is model
    assert log == []
    after = [l.kernel for l in model.layers if hasattr(l, "kernel")]
    for b, a in zip(before, after):
        np.testing.assert_array_equal(b, a)


def test_same_seed_gives_identical_logs():
    data = make_data(6, seed=1)
    val = make_data(2, seed=2)
    cfg = SgdMomentumConfig(learning_rate=0.005, epochs=4, batch_size=2, seed=33)
    _, log1 = train(tiny_model(5), data, val, cfg)
    _, log2 = train(tiny_model(5), data, val, cfg)
    assert [(s.epoch, s.train_mse, s.val_mse) for s in log1] == \
           [(s.epoch, s.train_mse, s.val_mse) for s in log2]


def test_best_epoch_snapshot_is_argmin_val():
    data = make_data(6, seed=3)
    val = make_data(3, seed=4)
    cfg = SgdMomentumConfig(learning_rate=0.01, epochs=6, batch_size=2, seed=7)
    best, log = train(tiny_model(9), data, val, cfg)
    val_curve = [s.val_mse for s in log]
    from voxboost.encoder.train import evaluate_dataset
    assert evaluate_dataset(best, val[0], val[1]) == pytest.approx(min(val_curve), rel=1e-12)


def test_single_sample_memorization():
    # overfit sanity: one sample, tiny model, loss collapses well below 10%
    vols, targets = make_data(1, seed=11)
    model = tiny_model(2)
    preds, _ = forward(model, vols)
    initial, _ = mse_multi_loss(preds, targets)
    cfg = SgdMomentumConfig(learning_rate=0.01, momentum=0.9, batch_size=1,
                            epochs=200, seed=0)
    best, log = train(model, (vols, targets), (vols, targets), cfg)
    preds, _ = forward(best, vols)
    final, _ = mse_multi_loss(preds, targets)
    assert final < 0.1 * initial


def test_partial_last_minibatch_is_trained():
    # 5 samples with batch 2 -> 3 minibatches including the trailing single
    data = make_data(5, seed=6)
    cfg = SgdMomentumConfig(learning_rate=0.001, epochs=1, batch_size=2, seed=1)
    model = tiny_model(3)
    w0 = model.layers[0].kernel.copy()
    train(model, data, data, cfg)
    assert not np.array_equal(w0, model.layers[0].kernel)


def test_empty_dataset_rejected():
    model = tiny_model()
    empty = (np.zeros((0, 2, 12, 12, 12)), np.zeros((0, 5)))
    with pytest.raises(InvalidInputError):
        train(model, empty, empty, SgdMomentumConfig())
