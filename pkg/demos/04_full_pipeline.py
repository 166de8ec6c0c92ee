"""End-to-end run at small scale through the library API.

Mirrors what `voxboost pipeline` does on disk: cohort, encoder, feature
extraction, two-stage grid search, both ablation arms, and a look at why
test scoring is a separate step.

Usage:
    python demos/04_full_pipeline.py   (about a minute on a laptop)
"""

import tempfile

import numpy as np

from voxboost.encoder import EncoderConfig, SgdMomentumConfig
from voxboost.pipeline import GridSpec, evaluate_mse, run_ablation, run_cnn_gbm
from voxboost.synth import CohortConfig, generate_cohort, residualize

workdir = tempfile.mkdtemp(prefix="voxboost_demo_")
cohort_cfg = CohortConfig(n_train=30, n_val=10, n_test=10, volume_size=24,
                          n_regions=27, missing_rate=0.0, seed=21)
records, sealed, _ = residualize(generate_cohort(cohort_cfg, workdir))
print(f"cohort of {len(records)} subjects in {workdir}")

enc_cfg = EncoderConfig(input_size=24, channel_schedule=(4, 8), head_outputs=27)
sgd_cfg = SgdMomentumConfig(learning_rate=0.01, momentum=0.9, batch_size=4,
                            epochs=3, seed=1)
grid = GridSpec(learning_rates=(0.03, 0.1), n_trees=(30,), max_depths=(2, 3),
                lams=(1.05,), alphas=(0.1,), fine_lr_factors=(0.8, 1.0, 1.25),
                fine_depth_delta=1, seed=2)

cnn = run_cnn_gbm(records, workdir, enc_cfg, sgd_cfg, grid)
print(f"\nencoder: best epoch {min(cnn.encoder_log, key=lambda s: s.val_mse).epoch}, "
      f"{cnn.features.shape[1]} features per subject")
print(f"grid search: {len(cnn.arm.grid_rows)} evaluations, winner "
      f"lr={cnn.arm.chosen_hp.learning_rate} depth={cnn.arm.chosen_hp.max_depth}")
print(f"cnn+gbm      train MSE {cnn.arm.train_mse:.4f}  val MSE {cnn.arm.val_mse:.4f}")

derived_arm, _ = run_ablation(records, workdir, enc_cfg, sgd_cfg, grid, cnn_result=cnn)
print(f"derived+gbm  train MSE {derived_arm.train_mse:.4f}  "
      f"val MSE {derived_arm.val_mse:.4f}")

# test scoring happens against the sealed answers, which no training code saw
ids, preds = cnn.arm.predictions["test"]
truth = np.array([sealed[s] for s in ids])
print(f"\ntest MSE (scored separately against sealed answers): "
      f"{evaluate_mse(preds, truth):.4f}")
