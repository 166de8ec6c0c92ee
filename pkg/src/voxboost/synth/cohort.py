"""Synthetic cohort generation.

Each subject is a dual-channel voxel cube: channel 0 is a smooth
intensity field over ellipsoidal regions plus optional Gaussian noise,
channel 1 a tissue-label map with values {0, 1, 2, 3}.  The regions sit
at fixed lattice positions (one per lattice cell, so they can never
overlap) with per-subject random semi-axes; the derived covariate vector
stores the exact voxel count of every region.  Scores are planted as a
linear function of the demographics plus a nonlinear (two pairwise
products) function of selected region volumes plus noise, so that the
image channel carries signal beyond what covariate residualization can
remove.

Determinism: fold assignment draws from the stream ``(seed, 0)`` and
subject ``i`` from ``(seed, 1, i)``, so generation is reproducible and
embarrassingly parallel across subjects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..rng import spawn_rng
from ..encoder.io import write_vvol

SITES = ("site_a", "site_b", "site_c", "site_d")
SEXES = ("F", "M")
ETHNICITIES = ("group_1", "group_2", "group_3", "group_4")
MARITAL = ("married", "single", "other")
ORDINAL_LEVELS = (1, 2, 3, 4, 5)

# survey fields that can be missing; brain volume is computed from the
# image itself and therefore always present
SURVEY_FIELDS = ("site", "age_months", "sex", "ethnicity",
                 "parental_education", "parental_income", "marital_status")

_FOLD_STREAM = 0
_SUBJECT_STREAM = 1


@dataclass
class DemographicCovariates:
    brain_volume: float
    site: str | None = None
    age_months: float | None = None
    sex: str | None = None
    ethnicity: str | None = None
    parental_education: int | None = None
    parental_income: int | None = None
    marital_status: str | None = None

    def has_missing(self) -> bool:
        return any(getattr(self, f) is None for f in SURVEY_FIELDS)


@dataclass
class SubjectRecord:
    subject_id: str
    fold: str  # train | validation | test | excluded
    volume_path: str
    derived: np.ndarray  # integer voxel counts, length n_regions
    demographics: DemographicCovariates
    raw_score: float
    residual_score: float | None = None


@dataclass(frozen=True)
class CohortConfig:
    n_train: int = 200
    n_val: int = 40
    n_test: int = 100
    volume_size: int = 48
    n_regions: int = 123
    noise_level: float = 1.0
    missing_rate: float = 0.01
    nonlinear_strength: float = 6.0
    seed: int = 17

    def __post_init__(self):
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ConfigError("fold sizes must all be >= 1")
        if self.n_regions < 8:
            raise ConfigError("cohort needs at least 8 regions for the planted signal")
        if not (0.0 <= self.missing_rate < 1.0):
            raise ConfigError("missing_rate must be in [0, 1)")
        if self.noise_level < 0 or self.nonlinear_strength < 0:
            raise ConfigError("noise_level and nonlinear_strength must be >= 0")
        # template feasibility: every region must fit its lattice cell and
        # cover at least one voxel
        if self.lattice_pitch() * _RADIUS_LO < 1.0:
            raise ConfigError(
                f"region template does not fit: {self.n_regions} regions in a "
                f"{self.volume_size}^3 volume leaves cells of "
                f"{self.lattice_pitch():.2f} voxels")

    @property
    def n_subjects(self) -> int:
        return self.n_train + self.n_val + self.n_test

    def slots_per_axis(self) -> int:
        return math.ceil(self.n_regions ** (1.0 / 3.0) - 1e-9)

    def lattice_pitch(self) -> float:
        return self.volume_size / self.slots_per_axis()


_RADIUS_LO = 0.30  # semi-axis bounds as a fraction of the lattice pitch
_RADIUS_HI = 0.45  # < 0.5 guarantees regions stay inside their cells


def region_centers(cfg: CohortConfig) -> np.ndarray:
    """Fixed template: the first n_regions lattice cell centers, C-order."""
    slots = cfg.slots_per_axis()
    pitch = cfg.lattice_pitch()
    centers = []
    for a in range(slots):
        for b in range(slots):
            for c in range(slots):
                centers.append(((a + 0.5) * pitch, (b + 0.5) * pitch, (c + 0.5) * pitch))
    return np.asarray(centers[:cfg.n_regions])


def region_tissue_classes(cfg: CohortConfig) -> np.ndarray:
    """Region j collapses to tissue class (j mod 3) + 1; 0 is background."""
    return np.arange(cfg.n_regions) % 3 + 1


def signal_regions(cfg: CohortConfig) -> tuple[int, int, int, int]:
    """The four regions whose pairwise volume products carry the score signal."""
    n = cfg.n_regions
    picks = (n // 8, n // 3, (2 * n) // 3, n - 2)
    if len(set(picks)) != 4:
        raise ConfigError("signal regions collide; increase n_regions")
    return picks


def reference_region_volume(cfg: CohortConfig) -> float:
    """Ellipsoid volume at the mean semi-axis; normalizes the planted signal."""
    r = 0.5 * (_RADIUS_LO + _RADIUS_HI) * cfg.lattice_pitch()
    return 4.0 / 3.0 * math.pi * r ** 3


_SITE_EFFECT = {"site_a": 0.0, "site_b": 1.5, "site_c": -1.0, "site_d": 0.5}
_ETHNICITY_EFFECT = {"group_1": 0.0, "group_2": 0.7, "group_3": -0.3, "group_4": 1.1}
_MARITAL_EFFECT = {"married": 1.0, "single": -0.5, "other": 0.0}


def linear_score_part(demo: DemographicCovariates) -> float:
    """The covariate-explained score component (removed by residualization)."""
    return (100.0
            + 0.5 * (demo.age_months - 120.0)
            + (2.0 if demo.sex == "M" else 0.0)
            + _SITE_EFFECT[demo.site]
            + 1.2 * demo.parental_education
            + 0.8 * demo.parental_income
            + _MARITAL_EFFECT[demo.marital_status]
            + _ETHNICITY_EFFECT[demo.ethnicity]
            + 0.004 * demo.brain_volume)


def nonlinear_score_part(cfg: CohortConfig, derived: np.ndarray) -> float:
    """Planted volumetric signal: two pairwise products of relative volumes."""
    ref = reference_region_volume(cfg)
    a, b, c, d = signal_regions(cfg)
    u = derived.astype(np.float64) / ref - 1.0
    return cfg.nonlinear_strength * (u[a] * u[b] + u[c] * u[d])


def _paint_subject(cfg: CohortConfig, rng: np.random.Generator):
    """Volume channels plus exact per-region voxel counts for one subject."""
    s = cfg.volume_size
    centers = region_centers(cfg)
    classes = region_tissue_classes(cfg)
    pitch = cfg.lattice_pitch()
    radii = rng.uniform(_RADIUS_LO * pitch, _RADIUS_HI * pitch, size=(cfg.n_regions, 3))
    amps = rng.uniform(0.5, 1.5, size=cfg.n_regions)

    intensity = np.zeros((s, s, s), dtype=np.float64)
    labels = np.zeros((s, s, s), dtype=np.float64)
    derived = np.zeros(cfg.n_regions, dtype=np.int64)
    for j in range(cfg.n_regions):
        cz, cy, cx = centers[j]
        rz, ry, rx = radii[j]
        z0, z1 = max(0, math.floor(cz - rz)), min(s - 1, math.ceil(cz + rz))
        y0, y1 = max(0, math.floor(cy - ry)), min(s - 1, math.ceil(cy + ry))
        x0, x1 = max(0, math.floor(cx - rx)), min(s - 1, math.ceil(cx + rx))
        zz, yy, xx = np.meshgrid(np.arange(z0, z1 + 1), np.arange(y0, y1 + 1),
                                 np.arange(x0, x1 + 1), indexing="ij")
        d2 = (((zz - cz) / rz) ** 2 + ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2)
        mask = d2 <= 1.0
        derived[j] = int(mask.sum())
        block = intensity[z0:z1 + 1, y0:y1 + 1, x0:x1 + 1]
        block[mask] = amps[j] * (1.0 - d2[mask])
        labels[z0:z1 + 1, y0:y1 + 1, x0:x1 + 1][mask] = classes[j]

    demo_draws = {
        "site": SITES[rng.integers(len(SITES))],
        "age_months": float(rng.uniform(107.0, 132.0)),
        "sex": SEXES[rng.integers(len(SEXES))],
        "ethnicity": ETHNICITIES[rng.integers(len(ETHNICITIES))],
        "parental_education": int(rng.integers(1, len(ORDINAL_LEVELS) + 1)),
        "parental_income": int(rng.integers(1, len(ORDINAL_LEVELS) + 1)),
        "marital_status": MARITAL[rng.integers(len(MARITAL))],
    }
    missing_mask = rng.random(len(SURVEY_FIELDS)) < cfg.missing_rate
    score_noise = float(rng.normal(0.0, 1.0)) if cfg.noise_level > 0 else 0.0
    if cfg.noise_level > 0:
        intensity += rng.normal(0.0, 0.02 * cfg.noise_level, size=(s, s, s))
    return intensity, labels, derived, demo_draws, missing_mask, score_noise


def fold_assignment(cfg: CohortConfig, n_records: int | None = None) -> list[str]:
    """Deterministic seeded fold labels for subjects 0..n-1."""
    n = cfg.n_subjects if n_records is None else n_records
    if n != cfg.n_subjects:
        raise ConfigError(
            f"fold sizes {cfg.n_train}+{cfg.n_val}+{cfg.n_test} do not sum to {n} records")
    rng = spawn_rng(cfg.seed, _FOLD_STREAM)
    order = rng.permutation(n)
    folds = [""] * n
    for rank, idx in enumerate(order):
        if rank < cfg.n_train:
            folds[idx] = "train"
        elif rank < cfg.n_train + cfg.n_val:
            folds[idx] = "validation"
        else:
            folds[idx] = "test"
    return folds


def split_folds(records: list[SubjectRecord], cfg: CohortConfig) -> list[SubjectRecord]:
    """Assign folds to an existing record list (same rule generation uses)."""
    folds = fold_assignment(cfg, len(records))
    for record, fold in zip(records, folds):
        record.fold = fold
    return records


def generate_cohort(cfg: CohortConfig, outdir: str | Path) -> list[SubjectRecord]:
    """Generate all subjects and write their volumes under outdir/volumes/."""
    outdir = Path(outdir)
    folds = fold_assignment(cfg)
    records: list[SubjectRecord] = []
    for i in range(cfg.n_subjects):
        rng = spawn_rng(cfg.seed, _SUBJECT_STREAM, i)
        intensity, labels, derived, demo_draws, missing_mask, score_noise = \
            _paint_subject(cfg, rng)

        sid = f"sub{i:04d}"
        demo = DemographicCovariates(brain_volume=float(derived.sum()), **demo_draws)
        raw = (linear_score_part(demo) + nonlinear_score_part(cfg, derived)
               + cfg.noise_level * score_noise)
        # test subjects never have missing covariates, so the exclusion
        # rule never has to guess about unanswerable test rows
        if folds[i] != "test":
            for field_name, missing in zip(SURVEY_FIELDS, missing_mask):
                if missing:
                    setattr(demo, field_name, None)

        rel_path = f"volumes/{sid}.vvol"
        volume = np.stack([intensity, labels]).astype(np.float32)
        write_vvol(outdir / rel_path, volume)
        records.append(SubjectRecord(
            subject_id=sid, fold=folds[i], volume_path=rel_path,
            derived=derived, demographics=demo, raw_score=float(raw)))
    return records


def load_cohort_volumes(records: list[SubjectRecord], outdir: str | Path,
                        dtype=np.float32) -> np.ndarray:
    """Stack every record's volume into one (N, 2, S, S, S) array."""
    from ..encoder.io import read_vvol

    outdir = Path(outdir)
    vols = [read_vvol(outdir / r.volume_path) for r in records]
    return np.stack(vols).astype(dtype)
