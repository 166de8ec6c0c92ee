"""Primitive layer operations: 3D convolution, 2^3 max pooling, ReLU,
multi-output MSE loss, and the classical-momentum SGD step.

Arrays are numpy, shaped (N, C, D, H, W); a single sample (C, D, H, W)
is accepted everywhere and returned at the same rank.  Convolutions are
cross-correlations with stride 1 and zero padding, delegated to torch's
CPU kernels (the only dependency-backed primitive in the package; numpy
matmul was measured an order of magnitude slower at training scale).
Gradients are exact adjoints computed with transposed convolutions, not
autograd.  Max pooling is pure numpy so argmax ties resolve to the first
window position in scan order, which torch does not guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as tf

from ..errors import InternalError, InvalidInputError

torch.set_grad_enabled(False)


@dataclass
class Conv3dLayer:
    """Stride-1 convolution; padding is (k-1)/2 (same size, odd k) or 0."""

    kernel: np.ndarray  # (out_ch, in_ch, k, k, k)
    bias: np.ndarray    # (out_ch,)
    padding: int

    def __post_init__(self):
        if self.kernel.ndim != 5 or self.kernel.shape[2] != self.kernel.shape[3] \
                or self.kernel.shape[3] != self.kernel.shape[4]:
            raise InvalidInputError("conv kernel must be (out, in, k, k, k) with cubic k")
        k = self.kernel.shape[2]
        if self.padding not in (0, (k - 1) // 2):
            raise InvalidInputError("padding must be 0 (valid) or (k-1)/2 (same)")
        if self.padding > 0 and k % 2 == 0:
            raise InvalidInputError("same-size padding requires an odd kernel size")
        if self.bias.shape != (self.kernel.shape[0],):
            raise InvalidInputError("bias length must equal output channel count")

    @property
    def k(self) -> int:
        return self.kernel.shape[2]


class ReluLayer:
    pass


class MaxPool3dLayer:
    pass


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    if x.ndim == 4:
        return x[None], True
    if x.ndim == 5:
        return x, False
    raise InvalidInputError("expected a (C,D,H,W) volume or (N,C,D,H,W) batch")


def _unbatch(x: np.ndarray, squeeze: bool) -> np.ndarray:
    return x[0] if squeeze else x


def _t(x: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(x))


def conv3d_forward(x: np.ndarray, layer: Conv3dLayer) -> np.ndarray:
    x, squeeze = _as_batch(x)
    if x.shape[1] != layer.kernel.shape[1]:
        raise InvalidInputError(
            f"input has {x.shape[1]} channels, layer expects {layer.kernel.shape[1]}")
    if min(x.shape[2:]) + 2 * layer.padding < layer.k:
        raise InvalidInputError("input spatial extent smaller than kernel")
    w = layer.kernel.astype(x.dtype, copy=False)
    b = layer.bias.astype(x.dtype, copy=False)
    out = tf.conv3d(_t(x), _t(w), _t(b), padding=layer.padding).numpy()
    return _unbatch(out, squeeze)


def conv3d_backward(grad_out: np.ndarray, x: np.ndarray, layer: Conv3dLayer,
                    need_grad_input: bool = True):
    """Exact gradients of conv3d_forward: (grad_input, grad_kernel, grad_bias).

    For stride 1 the input gradient is the correlation of grad_out with the
    spatially flipped, channel-transposed kernel at complementary padding
    (measurably faster than conv_transpose3d); grad_kernel correlates the
    channel-major-transposed input with grad_out; grad_bias sums grad_out
    over batch and space.  ``need_grad_input=False`` skips the input
    gradient (None) for layers whose input is data, not an activation.
    """
    grad_out, squeeze = _as_batch(grad_out)
    x, _ = _as_batch(x)
    expected = (x.shape[0], layer.kernel.shape[0]) + tuple(
        s + 2 * layer.padding - layer.k + 1 for s in x.shape[2:])
    if grad_out.shape != expected:
        raise InvalidInputError(
            f"grad_out shape {grad_out.shape} does not match forward output {expected}")
    go = _t(grad_out.astype(x.dtype, copy=False))
    xt = _t(x)
    w = _t(layer.kernel.astype(x.dtype, copy=False))
    grad_input = None
    if need_grad_input:
        w_flip = w.flip(2, 3, 4).transpose(0, 1).contiguous()
        grad_input = tf.conv3d(go, w_flip, padding=layer.k - 1 - layer.padding).numpy()
        grad_input = _unbatch(grad_input, squeeze)
    grad_kernel = tf.conv3d(
        xt.transpose(0, 1), go.transpose(0, 1), padding=layer.padding
    ).transpose(0, 1).numpy()
    grad_bias = grad_out.sum(axis=(0, 2, 3, 4))
    return grad_input, grad_kernel, grad_bias


def _pool_windows(x: np.ndarray) -> np.ndarray:
    n, c, d, h, w = x.shape
    r = x.reshape(n, c, d // 2, 2, h // 2, 2, w // 2, 2)
    return r.transpose(0, 1, 2, 4, 6, 3, 5, 7).reshape(n, c, d // 2, h // 2, w // 2, 8)


def maxpool3d_forward(x: np.ndarray):
    """2^3 window, stride 2; returns (output, argmax offsets in scan order)."""
    x, squeeze = _as_batch(x)
    if any(s % 2 for s in x.shape[2:]):
        raise InvalidInputError("max pooling requires even spatial dimensions")
    win = _pool_windows(x)
    idx = win.argmax(axis=-1).astype(np.int8)  # np.argmax keeps the first max
    out = np.take_along_axis(win, idx[..., None].astype(np.int64), axis=-1)[..., 0]
    return _unbatch(out, squeeze), _unbatch(idx, squeeze)


def maxpool3d_backward(grad_out: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Route each output gradient to its recorded argmax voxel."""
    grad_out, squeeze = _as_batch(grad_out)
    idx, _ = _as_batch(idx)
    if idx.shape != grad_out.shape:
        raise InvalidInputError("argmax index shape must match grad_out")
    if idx.min() < 0 or idx.max() > 7:
        raise InternalError("argmax offsets out of window range")
    n, c, d2, h2, w2 = grad_out.shape
    win = np.zeros((n, c, d2, h2, w2, 8), dtype=grad_out.dtype)
    np.put_along_axis(win, idx[..., None].astype(np.int64), grad_out[..., None], axis=-1)
    r = win.reshape(n, c, d2, h2, w2, 2, 2, 2).transpose(0, 1, 2, 5, 3, 6, 4, 7)
    return _unbatch(r.reshape(n, c, 2 * d2, 2 * h2, 2 * w2), squeeze)


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    if grad_out.shape != x.shape:
        raise InvalidInputError("relu_backward shapes must match")
    return np.where(x > 0, grad_out, 0)


def mse_multi_loss(pred: np.ndarray, target: np.ndarray):
    """Mean over (batch x outputs) squared error, with gradient wrt pred."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape or pred.ndim != 2:
        raise InvalidInputError("loss requires matching (batch, outputs) arrays")
    diff = pred.astype(np.float64) - target.astype(np.float64)
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad.astype(pred.dtype)


def sgd_momentum_step(weights: np.ndarray, grads: np.ndarray, buffers: np.ndarray,
                      lr: float, momentum: float):
    """Classical (heavy-ball) momentum: v <- mu*v + g; w <- w - lr*v."""
    if weights.shape != grads.shape or weights.shape != buffers.shape:
        raise InvalidInputError("weights, grads and momentum buffers must share shape")
    v = momentum * buffers + grads
    return weights - lr * v, v
