"""Encoder architecture: conv/ReLU/conv/ReLU/max-pool blocks plus a
full-extent convolutional head.

The input is a dual-channel cube whose edge halves per block until the
6^3 scale; the head convolves the entire 6^3 map into one position with
``head_outputs`` channels, so a forward pass emits exactly that many
scalars and the network stays purely convolutional.  Features for the
downstream regressor are the flattened (channel-major) 6^3 map, or its
2^3 max-pool at the 3^3 scale.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError
from ..rng import spawn_rng
from .layers import (
    Conv3dLayer,
    MaxPool3dLayer,
    ReluLayer,
    conv3d_backward,
    conv3d_forward,
    maxpool3d_backward,
    maxpool3d_forward,
    relu_backward,
    relu_forward,
)

FEATURE_EDGE = 6  # spatial edge of the last pooled map, fixed by design
IN_CHANNELS = 2   # intensity + tissue-label channel


@dataclass(frozen=True)
class EncoderConfig:
    input_size: int = 48
    channel_schedule: tuple[int, ...] = (8, 16, 32)
    head_outputs: int = 123

    def __post_init__(self):
        object.__setattr__(self, "channel_schedule", tuple(self.channel_schedule))
        if self.head_outputs < 1:
            raise InvalidInputError("head_outputs must be positive")
        if len(self.channel_schedule) < 1 or any(c < 1 for c in self.channel_schedule):
            raise InvalidInputError("channel_schedule must list positive channel counts")
        size = self.input_size
        for _ in self.channel_schedule:
            if size % 2:
                raise InvalidInputError(
                    f"input_size {self.input_size} not divisible through the pooling schedule")
            size //= 2
        if size != FEATURE_EDGE:
            raise InvalidInputError(
                f"input_size {self.input_size} with {len(self.channel_schedule)} blocks "
                f"reaches edge {size}, expected {FEATURE_EDGE}")

    @property
    def n_blocks(self) -> int:
        return len(self.channel_schedule)

    @property
    def feature_channels(self) -> int:
        return self.channel_schedule[-1]


@dataclass
class EncoderModel:
    """Layer stack plus the momentum buffers used by SGD training."""

    config: EncoderConfig
    layers: list
    dtype: np.dtype
    momentum: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def conv_indices(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if isinstance(l, Conv3dLayer)]

    def zero_momentum(self) -> None:
        self.momentum = {
            i: (np.zeros_like(self.layers[i].kernel), np.zeros_like(self.layers[i].bias))
            for i in self.conv_indices()
        }

    def copy(self) -> "EncoderModel":
        return copy.deepcopy(self)


def init_encoder(config: EncoderConfig, seed: int, dtype=np.float32) -> EncoderModel:
    """Seeded Glorot-uniform kernels (per-layer streams), zero biases."""
    dtype = np.dtype(dtype)
    layers: list = []
    layer_seed = 0

    def make_conv(out_ch: int, in_ch: int, k: int, padding: int) -> Conv3dLayer:
        nonlocal layer_seed
        rng = spawn_rng(seed, layer_seed)
        layer_seed += 1
        fan_in = in_ch * k ** 3
        fan_out = out_ch * k ** 3
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        kernel = rng.uniform(-bound, bound, size=(out_ch, in_ch, k, k, k))
        return Conv3dLayer(kernel=kernel.astype(dtype),
                           bias=np.zeros(out_ch, dtype=dtype), padding=padding)

    in_ch = IN_CHANNELS
    for out_ch in config.channel_schedule:
        layers.append(make_conv(out_ch, in_ch, 3, 1))
        layers.append(ReluLayer())
        layers.append(make_conv(out_ch, out_ch, 3, 1))
        layers.append(ReluLayer())
        layers.append(MaxPool3dLayer())
        in_ch = out_ch
    layers.append(make_conv(config.head_outputs, in_ch, FEATURE_EDGE, 0))

    model = EncoderModel(config=config, layers=layers, dtype=dtype)
    model.zero_momentum()
    return model


def _check_batch(model: EncoderModel, batch: np.ndarray) -> tuple[np.ndarray, bool]:
    batch = np.asarray(batch)
    squeeze = batch.ndim == 4
    if squeeze:
        batch = batch[None]
    s = model.config.input_size
    if batch.ndim != 5 or batch.shape[1:] != (IN_CHANNELS, s, s, s):
        raise InvalidInputError(
            f"expected batch shaped (N, {IN_CHANNELS}, {s}, {s}, {s}), got {batch.shape}")
    return np.ascontiguousarray(batch, dtype=model.dtype), squeeze


def forward(model: EncoderModel, batch: np.ndarray):
    """Run the stack; returns ((N, head_outputs) predictions, activation cache)."""
    x, squeeze = _check_batch(model, batch)
    cache = []
    for layer in model.layers:
        if isinstance(layer, Conv3dLayer):
            cache.append(("conv", x))
            x = conv3d_forward(x, layer)
        elif isinstance(layer, ReluLayer):
            cache.append(("relu", x))
            x = relu_forward(x)
        else:
            out, idx = maxpool3d_forward(x)
            cache.append(("pool", idx))
            x = out
    preds = x.reshape(x.shape[0], model.config.head_outputs)
    return (preds[0] if squeeze else preds), cache


def backward(model: EncoderModel, cache: list, grad_preds: np.ndarray) -> dict:
    """Gradients of the loss wrt every conv kernel/bias, from cached activations."""
    n = grad_preds.shape[0]
    g = np.ascontiguousarray(grad_preds, dtype=model.dtype).reshape(
        n, model.config.head_outputs, 1, 1, 1)
    grads: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        kind, saved = cache[i]
        if isinstance(layer, Conv3dLayer):
            g, gk, gb = conv3d_backward(g, saved, layer, need_grad_input=i > 0)
            grads[i] = (gk, gb)
        elif isinstance(layer, ReluLayer):
            g = relu_backward(g, saved)
        else:
            g = maxpool3d_backward(g, saved)
    return grads


def _run_blocks(model: EncoderModel, batch: np.ndarray) -> np.ndarray:
    """Forward through the conv blocks only, stopping at the 6^3 map."""
    x = batch
    for layer in model.layers[:-1]:
        if isinstance(layer, Conv3dLayer):
            x = conv3d_forward(x, layer)
        elif isinstance(layer, ReluLayer):
            x = relu_forward(x)
        else:
            x, _ = maxpool3d_forward(x)
    return x


def extract_features_batch(model: EncoderModel, volumes: np.ndarray, scale: int = 6) -> np.ndarray:
    """Flattened channel-major feature maps for a batch of volumes.

    scale 6 returns the final pooled map (channels x 216 values per
    subject); scale 3 max-pools that map once more (channels x 27).
    Flattening order is C-contiguous over (channel, z, y, x).
    """
    if scale not in (3, 6):
        raise InvalidInputError(f"feature scale must be 6 or 3, got {scale}")
    x, _ = _check_batch(model, volumes)
    fmap = _run_blocks(model, x)
    if scale == 3:
        fmap, _ = maxpool3d_forward(fmap)
    return np.ascontiguousarray(fmap.reshape(fmap.shape[0], -1), dtype=np.float64)


def extract_features(model: EncoderModel, volume: np.ndarray, scale: int = 6) -> np.ndarray:
    """Feature vector for one volume; pure function of (model, volume)."""
    volume = np.asarray(volume)
    if volume.ndim != 4:
        raise InvalidInputError("extract_features expects a single (C,D,H,W) volume")
    return extract_features_batch(model, volume[None], scale)[0]
