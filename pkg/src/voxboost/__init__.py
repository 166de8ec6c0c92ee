"""voxboost: volumetric feature compression + boosted-tree score regression.

The package has four layers:

* ``voxboost.gbm``      -- gradient boosting machine over exact-greedy
  regression trees with elastic-net penalized leaf values and stage weights.
* ``voxboost.encoder``  -- dual-channel 3D fully-convolutional encoder
  trained with SGD+momentum to regress per-subject volumetric covariates,
  used afterwards as a feature extractor at the 6x6x6 / 3x3x3 scales.
* ``voxboost.synth``    -- synthetic cohort generator (voxel volumes,
  covariates, demographics, scores) and covariate residualization.
* ``voxboost.pipeline`` -- grid search, end-to-end experiment runs,
  ablation, and the standalone scoring step.

``voxboost.cli`` exposes all stages as subcommands of the ``voxboost``
console script.
"""

__version__ = "0.1.0"
