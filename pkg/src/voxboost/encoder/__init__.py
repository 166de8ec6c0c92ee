"""Dual-channel 3D fully-convolutional encoder and its training loop."""

from .io import load_checkpoint, read_vvol, save_checkpoint, write_vvol
from .layers import (
    Conv3dLayer,
    MaxPool3dLayer,
    ReluLayer,
    conv3d_backward,
    conv3d_forward,
    maxpool3d_backward,
    maxpool3d_forward,
    mse_multi_loss,
    relu_backward,
    relu_forward,
    sgd_momentum_step,
)
from .model import (
    EncoderConfig,
    EncoderModel,
    backward,
    extract_features,
    extract_features_batch,
    forward,
    init_encoder,
)
from .train import EpochStats, SgdMomentumConfig, evaluate_dataset, train

__all__ = [
    "Conv3dLayer",
    "EncoderConfig",
    "EncoderModel",
    "EpochStats",
    "MaxPool3dLayer",
    "ReluLayer",
    "SgdMomentumConfig",
    "backward",
    "conv3d_backward",
    "conv3d_forward",
    "evaluate_dataset",
    "extract_features",
    "extract_features_batch",
    "forward",
    "init_encoder",
    "load_checkpoint",
    "maxpool3d_backward",
    "maxpool3d_forward",
    "mse_multi_loss",
    "read_vvol",
    "relu_backward",
    "relu_forward",
    "save_checkpoint",
    "sgd_momentum_step",
    "train",
    "write_vvol",
]
