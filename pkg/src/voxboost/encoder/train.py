"""Minibatch SGD-with-momentum training loop for the encoder.

Each epoch shuffles the training set with the seeded generator, walks
minibatches of ``batch_size`` (the last partial batch is kept), and then
scores the validation set.  The returned model is the snapshot from the
epoch with the lowest validation MSE (ties go to the earlier epoch), so
callers get the early-stopped weights regardless of later drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..rng import make_rng
from .layers import Conv3dLayer, mse_multi_loss, sgd_momentum_step
from .model import EncoderModel, backward, forward


@dataclass(frozen=True)
class SgdMomentumConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 4
    epochs: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if not (0.0 <= self.momentum < 1.0):
            raise InvalidInputError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidInputError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class EpochStats:
    epoch: int
    train_mse: float
    val_mse: float


def _dataset(pair) -> tuple[np.ndarray, np.ndarray]:
    volumes, targets = pair
    volumes = np.asarray(volumes)
    targets = np.asarray(targets)
    if volumes.ndim != 5 or targets.ndim != 2 or volumes.shape[0] != targets.shape[0] \
            or volumes.shape[0] == 0:
        raise InvalidInputError("dataset must pair (N,C,D,H,W) volumes with (N,K) targets")
    return volumes, targets


def evaluate_dataset(model: EncoderModel, volumes: np.ndarray, targets: np.ndarray,
                     batch_size: int = 8) -> float:
    """Covariate MSE of the model over a dataset, in fixed batch order."""
    total = 0.0
    n = volumes.shape[0]
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        preds, _ = forward(model, volumes[lo:hi])
        loss, _ = mse_multi_loss(preds, targets[lo:hi].astype(preds.dtype))
        total += loss * (hi - lo)
    return total / n


def train_step(model: EncoderModel, volumes: np.ndarray, targets: np.ndarray,
               lr: float, momentum: float) -> float:
    """One minibatch update; returns the batch loss before the step."""
    preds, cache = forward(model, volumes)
    loss, grad = mse_multi_loss(preds, targets.astype(preds.dtype))
    grads = backward(model, cache, grad)
    for i, layer in enumerate(model.layers):
        if not isinstance(layer, Conv3dLayer):
            continue
        gk, gb = grads[i]
        vk, vb = model.momentum[i]
        layer.kernel, vk = sgd_momentum_step(layer.kernel, gk, vk, lr, momentum)
        layer.bias, vb = sgd_momentum_step(layer.bias, gb, vb, lr, momentum)
        model.momentum[i] = (vk, vb)
    return loss


def train(model: EncoderModel, train_set, val_set, cfg: SgdMomentumConfig):
    """Train in place; returns (best-epoch snapshot, per-epoch stats)."""
    train_vols, train_targets = _dataset(train_set)
    val_vols, val_targets = _dataset(val_set)
    if train_targets.shape[1] != model.config.head_outputs:
        raise InvalidInputError("target width must match the encoder head")
    if cfg.epochs == 0:
        return model, []

    rng = make_rng(cfg.seed)
    best_model = model.copy()
    best_val = np.inf
    log: list[EpochStats] = []
    n = train_vols.shape[0]
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        running = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            loss = train_step(model, train_vols[idx], train_targets[idx],
                              cfg.learning_rate, cfg.momentum)
            running += loss * idx.size
        val_mse = evaluate_dataset(model, val_vols, val_targets)
        log.append(EpochStats(epoch=epoch, train_mse=running / n, val_mse=val_mse))
        if val_mse < best_val:
            best_val = val_mse
            best_model = model.copy()
    return best_model, log
