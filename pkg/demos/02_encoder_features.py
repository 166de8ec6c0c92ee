"""The volumetric encoder as a feature extractor.

Builds a small dual-channel encoder, shows the fixed-width regression
head, trains it briefly on random covariate targets, and extracts the
flattened feature maps at both spatial scales.

Usage:
    python demos/02_encoder_features.py
"""

import numpy as np

from voxboost.encoder import (
    EncoderConfig,
    SgdMomentumConfig,
    extract_features,
    forward,
    init_encoder,
    train,
)

cfg = EncoderConfig(input_size=24, channel_schedule=(4, 8), head_outputs=123)
model = init_encoder(cfg, seed=3, dtype=np.float32)

rng = np.random.default_rng(1)
volumes = rng.normal(size=(12, 2, 24, 24, 24)).astype(np.float32)
targets = rng.normal(size=(12, 123))

preds, _ = forward(model, volumes[:4])
print(f"input batch {volumes[:4].shape} -> predictions {preds.shape}")

best, log = train(model, (volumes[:10], targets[:10]), (volumes[10:], targets[10:]),
                  SgdMomentumConfig(learning_rate=0.003, momentum=0.9,
                                    batch_size=4, epochs=5, seed=0))
print("epoch  train MSE  val MSE")
for s in log:
    print(f"{s.epoch:5d}  {s.train_mse:9.4f}  {s.val_mse:7.4f}")

f6 = extract_features(best, volumes[0], scale=6)
f3 = extract_features(best, volumes[0], scale=3)
print(f"\nscale 6^3 features: {f6.shape[0]} values (= {cfg.feature_channels} channels x 216)")
print(f"scale 3^3 features: {f3.shape[0]} values (= {cfg.feature_channels} channels x 27)")
print("3^3 map is the 2^3 max-pool of the 6^3 map:",
      np.allclose(f3.reshape(8, 3, 3, 3)[0, 0, 0, 0],
                  f6.reshape(8, 6, 6, 6)[0, :2, :2, :2].max()))
