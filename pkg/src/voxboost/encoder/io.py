"""On-disk formats: ``vvol v1`` volume container and ``vbenc v1`` checkpoints.

vvol v1 is an ASCII header line ``vvol v1 <channels> <depth> <height>
<width>`` followed by raw little-endian 32-bit floats in channel-major
(C-contiguous) order.

vbenc v1 is an ASCII manifest describing the layer stack, then one
little-endian 64-bit float blob per conv layer (kernel, then bias) in
manifest order.  Weights are stored at 64-bit regardless of the runtime
dtype recorded in the manifest.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import InvalidInputError, MissingArtifactError
from .layers import Conv3dLayer, MaxPool3dLayer, ReluLayer
from .model import EncoderConfig, EncoderModel

_VVOL_MAGIC = b"vvol v1"
_CKPT_MAGIC = "vbenc v1"


def write_vvol(path: str | Path, volume: np.ndarray) -> None:
    volume = np.asarray(volume)
    if volume.ndim != 4:
        raise InvalidInputError("vvol stores a (channels, depth, height, width) volume")
    c, d, h, w = volume.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(f"vvol v1 {c} {d} {h} {w}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(volume, dtype="<f4").tobytes())


def read_vvol(path: str | Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing volume file: {path}")
    with open(path, "rb") as fh:
        header = fh.readline().rstrip(b"\n")
        parts = header.split(b" ")
        if len(parts) != 6 or b" ".join(parts[:2]) != _VVOL_MAGIC:
            raise InvalidInputError(f"not a vvol v1 file: {path}")
        c, d, h, w = (int(p) for p in parts[2:])
        data = fh.read()
    expected = c * d * h * w * 4
    if len(data) != expected:
        raise InvalidInputError(
            f"vvol payload is {len(data)} bytes, header implies {expected}: {path}")
    return np.frombuffer(data, dtype="<f4").reshape(c, d, h, w).copy()


def save_checkpoint(model: EncoderModel, path: str | Path) -> None:
    lines = [
        _CKPT_MAGIC,
        f"input_size {model.config.input_size}",
        f"head_outputs {model.config.head_outputs}",
        "channels " + " ".join(str(c) for c in model.config.channel_schedule),
        f"dtype {np.dtype(model.dtype).name}",
        f"layers {len(model.layers)}",
    ]
    blobs = []
    for layer in model.layers:
        if isinstance(layer, Conv3dLayer):
            o, i, k, _, _ = layer.kernel.shape
            lines.append(f"conv {o} {i} {k} {layer.padding}")
            blobs.append(np.ascontiguousarray(layer.kernel, dtype="<f8").tobytes())
            blobs.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
        elif isinstance(layer, ReluLayer):
            lines.append("relu")
        else:
            lines.append("pool")
    lines.append("end")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> EncoderModel:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"missing checkpoint: {path}")
    with open(path, "rb") as fh:
        if fh.readline().rstrip(b"\n").decode("ascii") != _CKPT_MAGIC:
            raise InvalidInputError(f"not a {_CKPT_MAGIC} checkpoint: {path}")
        fields = {}
        for key in ("input_size", "head_outputs", "channels", "dtype", "layers"):
            name, _, val = fh.readline().rstrip(b"\n").decode("ascii").partition(" ")
            if name != key:
                raise InvalidInputError(f"checkpoint manifest missing field {key!r}: {path}")
            fields[key] = val
        n_layers = int(fields["layers"])
        specs = []
        for _ in range(n_layers):
            specs.append(fh.readline().rstrip(b"\n").decode("ascii").split(" "))
        if fh.readline().rstrip(b"\n") != b"end":
            raise InvalidInputError(f"checkpoint manifest missing end marker: {path}")

        config = EncoderConfig(
            input_size=int(fields["input_size"]),
            channel_schedule=tuple(int(c) for c in fields["channels"].split(" ")),
            head_outputs=int(fields["head_outputs"]),
        )
        dtype = np.dtype(fields["dtype"])
        layers: list = []
        for spec in specs:
            if spec[0] == "conv":
                o, i, k, pad = (int(v) for v in spec[1:])
                kernel = np.frombuffer(fh.read(o * i * k ** 3 * 8), dtype="<f8")
                bias = np.frombuffer(fh.read(o * 8), dtype="<f8")
                if kernel.size != o * i * k ** 3 or bias.size != o:
                    raise InvalidInputError(f"truncated weight blob in {path}")
                layers.append(Conv3dLayer(
                    kernel=kernel.reshape(o, i, k, k, k).astype(dtype),
                    bias=bias.astype(dtype), padding=pad))
            elif spec[0] == "relu":
                layers.append(ReluLayer())
            elif spec[0] == "pool":
                layers.append(MaxPool3dLayer())
            else:
                raise InvalidInputError(f"unknown layer kind {spec[0]!r} in {path}")
    model = EncoderModel(config=config, layers=layers, dtype=dtype)
    model.zero_momentum()
    return model
