"""Declarative run configuration.

Config files are flat ``section.key = value`` text: one assignment per
line, ``#`` starts a comment, blank lines ignored.  Every key has a
documented default; unknown keys are a hard error listing every offender,
so typos cannot silently fall back to defaults.  ``print-config`` emits
the full default file, and that output parses back to the defaults.

A single global ``seed`` drives everything: the cohort uses it directly,
while the encoder and regressor derive disjoint streams from it, so two
runs differing only in ``seed`` differ everywhere, and reruns with equal
seeds are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig, SgdMomentumConfig
from .errors import ConfigError
from .gbm import GbmHyperparams
from .pipeline import GridSpec
from .synth import CohortConfig

_ENCODER_STREAM = 101
_GBM_STREAM = 202


def derive_seed(seed: int, stream: int) -> int:
    """Stable 64-bit child seed for one component stream."""
    ss = np.random.SeedSequence((seed, stream))
    return int(ss.generate_state(1, np.uint64)[0])


# key -> (type, default, doc); type in {int, float, str, ints, floats}
REGISTRY: dict[str, tuple[str, object, str]] = {
    "seed": ("int", 17, "global seed; component streams derive from it"),
    "workers": ("int", 1, "process parallelism for grid search (1 = sequential)"),
    "paths.workdir": ("str", "voxboost_run",
                      "working directory for all artifacts (env VOXBOOST_WORKDIR overrides)"),
    "cohort.n_train": ("int", 200, "training-fold subject count"),
    "cohort.n_val": ("int", 40, "validation-fold subject count"),
    "cohort.n_test": ("int", 100, "test-fold subject count"),
    "cohort.volume_size": ("int", 48, "voxel cube edge; must pool down to 6"),
    "cohort.n_regions": ("int", 123, "derived covariate count (ellipsoidal regions)"),
    "cohort.noise_level": ("float", 1.0, "score noise sigma; image noise is 0.02x this"),
    "cohort.missing_rate": ("float", 0.01, "per-field demographic missing probability"),
    "cohort.nonlinear_strength": ("float", 6.0,
                                  "planted volumetric (non-covariate) signal weight"),
    "encoder.channels": ("ints", (8, 16, 32), "conv channels per block; one block per entry"),
    "encoder.learning_rate": ("float", 0.01, "SGD learning rate"),
    "encoder.momentum": ("float", 0.9, "classical momentum coefficient"),
    "encoder.batch_size": ("int", 4, "minibatch size"),
    "encoder.epochs": ("int", 15, "training epochs; best validation epoch is kept"),
    "encoder.dtype": ("str", "float32", "training float width: float32 or float64"),
    "encoder.feature_scale": ("int", 6, "feature map scale exported to the regressor (6 or 3)"),
    "gbm.learning_rate": ("float", 0.05, "shrinkage used when training without a grid search"),
    "gbm.n_trees": ("int", 150, "stage count used when training without a grid search"),
    "gbm.max_depth": ("int", 3, "tree depth used when training without a grid search"),
    "gbm.lambda": ("float", 1.05, "L2 penalty on leaf values and stage weights"),
    "gbm.alpha": ("float", 0.1, "L1 penalty on leaf values and stage weights"),
    "gbm.subsample": ("float", 0.8, "row fraction per boosting stage"),
    "grid.preset": ("str", "desk",
                    "desk = fast bracket, wide = full 180-configuration bracket"),
    "grid.learning_rates": ("floats", (0.003, 0.01, 0.03), "coarse shrinkage candidates"),
    "grid.n_trees": ("ints", (150,), "coarse stage-count candidates"),
    "grid.max_depths": ("ints", (3, 5), "coarse depth candidates"),
    "grid.lambdas": ("floats", (1.05,), "coarse L2 candidates"),
    "grid.alphas": ("floats", (0.1,), "coarse L1 candidates"),
    "grid.fine_lr_factors": ("floats", (0.6, 0.8, 1.0, 1.25, 1.67),
                             "fine-stage multipliers around the coarse-winner shrinkage"),
    "grid.fine_depth_delta": ("int", 2, "fine-stage depth offset (clamped at 1)"),
    "grid.subsample": ("float", 0.8, "row fraction, fixed across the grid"),
}

_WIDE_GRID = {
    "grid.learning_rates": (0.001, 0.003, 0.01, 0.03, 0.1),
    "grid.n_trees": (250, 500, 1000),
    "grid.max_depths": (3, 5, 7),
    "grid.lambdas": (0.0, 1.05),
    "grid.alphas": (0.0, 0.1),
}


def _parse_value(key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if not parts:
            raise ValueError("empty list")
        if kind == "ints":
            return tuple(int(p) for p in parts)
        return tuple(float(p) for p in parts)
    except ValueError as err:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({err})") from None


def _fmt_value(kind: str, value) -> str:
    if kind in ("ints", "floats"):
        return ", ".join(str(v) for v in value)
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values: dict[str, object] = {}
    unknown: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        if key not in REGISTRY:
            unknown.append(f"{source}:{lineno}: {key}")
            continue
        kind, _, _ = REGISTRY[key]
        values[key] = _parse_value(key, kind, raw)
    if unknown:
        raise ConfigError("unknown config keys:\n  " + "\n  ".join(unknown))
    return values


def default_config_text() -> str:
    lines = []
    for key, (kind, default, doc) in REGISTRY.items():
        lines.append(f"# {doc}")
        lines.append(f"{key} = {_fmt_value(kind, default)}")
        lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class RunConfig:
    """Typed view over the key/value registry."""

    values: tuple[tuple[str, object], ...]

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls(values=tuple((k, spec[1]) for k, spec in REGISTRY.items()))

    @classmethod
    def load(cls, path: str | Path | None = None,
             overrides: dict | None = None) -> "RunConfig":
        merged = {k: spec[1] for k, spec in REGISTRY.items()}
        file_values: dict = {}
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise ConfigError(f"config file not found: {p}")
            file_values = parse_config_text(p.read_text(encoding="utf-8"), str(p))
        if file_values.get("grid.preset", merged["grid.preset"]) == "wide":
            merged.update(_WIDE_GRID)
            merged["grid.preset"] = "wide"
        merged.update(file_values)
        for key, val in (overrides or {}).items():
            if key not in REGISTRY:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = val
        if merged["grid.preset"] not in ("desk", "wide"):
            raise ConfigError(f"grid.preset must be desk or wide, got {merged['grid.preset']!r}")
        if merged["encoder.dtype"] not in ("float32", "float64"):
            raise ConfigError("encoder.dtype must be float32 or float64")
        if merged["encoder.feature_scale"] not in (3, 6):
            raise ConfigError("encoder.feature_scale must be 6 or 3")
        return cls(values=tuple(merged.items()))

    def get(self, key: str):
        for k, v in self.values:
            if k == key:
                return v
        raise KeyError(key)

    def with_overrides(self, **kv) -> "RunConfig":
        mapping = dict(self.values)
        for key, val in kv.items():
            if key not in mapping:
                raise ConfigError(f"unknown config key {key!r}")
            mapping[key] = val
        return replace(self, values=tuple(mapping.items()))

    # component builders ------------------------------------------------
    @property
    def seed(self) -> int:
        return self.get("seed")

    @property
    def workers(self) -> int:
        return self.get("workers")

    @property
    def workdir(self) -> Path:
        return Path(self.get("paths.workdir"))

    @property
    def encoder_dtype(self):
        return np.float32 if self.get("encoder.dtype") == "float32" else np.float64

    @property
    def feature_scale(self) -> int:
        return self.get("encoder.feature_scale")

    def cohort_config(self) -> CohortConfig:
        return CohortConfig(
            n_train=self.get("cohort.n_train"), n_val=self.get("cohort.n_val"),
            n_test=self.get("cohort.n_test"), volume_size=self.get("cohort.volume_size"),
            n_regions=self.get("cohort.n_regions"), noise_level=self.get("cohort.noise_level"),
            missing_rate=self.get("cohort.missing_rate"),
            nonlinear_strength=self.get("cohort.nonlinear_strength"), seed=self.seed)

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(input_size=self.get("cohort.volume_size"),
                             channel_schedule=self.get("encoder.channels"),
                             head_outputs=self.get("cohort.n_regions"))

    def sgd_config(self) -> SgdMomentumConfig:
        return SgdMomentumConfig(
            learning_rate=self.get("encoder.learning_rate"),
            momentum=self.get("encoder.momentum"),
            batch_size=self.get("encoder.batch_size"),
            epochs=self.get("encoder.epochs"),
            seed=derive_seed(self.seed, _ENCODER_STREAM))

    def gbm_hyperparams(self) -> GbmHyperparams:
        return GbmHyperparams(
            learning_rate=self.get("gbm.learning_rate"), n_trees=self.get("gbm.n_trees"),
            max_depth=self.get("gbm.max_depth"), lam=self.get("gbm.lambda"),
            alpha=self.get("gbm.alpha"), subsample=self.get("gbm.subsample"),
            seed=derive_seed(self.seed, _GBM_STREAM)).validate()

    def grid_spec(self) -> GridSpec:
        return GridSpec(
            learning_rates=self.get("grid.learning_rates"),
            n_trees=self.get("grid.n_trees"),
            max_depths=self.get("grid.max_depths"),
            lams=self.get("grid.lambdas"),
            alphas=self.get("grid.alphas"),
            fine_lr_factors=self.get("grid.fine_lr_factors"),
            fine_depth_delta=self.get("grid.fine_depth_delta"),
            subsample=self.get("grid.subsample"),
            seed=derive_seed(self.seed, _GBM_STREAM))
