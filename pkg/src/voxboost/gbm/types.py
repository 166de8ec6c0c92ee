"""Model containers for the boosted-tree regressor."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InvalidInputError
from ..tabular import check_finite
from ._kernels import predict_tree_kernel


@dataclass(frozen=True)
class GbmHyperparams:
    """Training knobs for the boosting machine.

    ``learning_rate`` is the shrinkage multiplier applied to every stage's
    contribution; ``lam`` and ``alpha`` are the L2/L1 penalty weights on
    leaf values and stage weights; ``subsample`` is the fraction of rows
    each tree is fitted on.
    """

    learning_rate: float = 0.05
    n_trees: int = 150
    max_depth: int = 3
    lam: float = 1.05
    alpha: float = 0.1
    subsample: float = 0.8
    seed: int = 0

    def validate(self) -> "GbmHyperparams":
        if not (0.0 < self.learning_rate <= 1.0):
            raise InvalidInputError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        # n_trees = 0 is allowed: the model degenerates to its constant
        # initial estimator, which several contracts rely on.
        if self.n_trees < 0:
            raise InvalidInputError(f"n_trees must be >= 0, got {self.n_trees}")
        if self.max_depth < 1:
            raise InvalidInputError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.lam < 0.0 or self.alpha < 0.0:
            raise InvalidInputError("penalty weights lam and alpha must be >= 0")
        if not (0.0 < self.subsample <= 1.0):
            raise InvalidInputError(f"subsample must be in (0, 1], got {self.subsample}")
        if self.seed < 0:
            raise InvalidInputError("seed must be a non-negative integer")
        return self

    def with_seed(self, seed: int) -> "GbmHyperparams":
        return replace(self, seed=seed)


@dataclass
class RegressionTree:
    """Axis-aligned binary regression tree in flat-array form.

    ``feature[i] == -1`` marks node ``i`` as a leaf holding ``value[i]``;
    internal nodes route ``x[feature] <= threshold`` to ``left``, else
    ``right`` (ties go left).  Node 0 is the root and children always have
    larger indices, so the arrays are also a valid pre-order layout.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def depth(self) -> int:
        """Maximum root-to-leaf edge count."""

        def walk(node: int) -> int:
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
        if X.ndim != 2:
            raise InvalidInputError("tree prediction requires a 2-D matrix")
        return predict_tree_kernel(self.feature, self.threshold, self.left, self.right, self.value, X)


def validate_xy(X: np.ndarray, y: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Check the FeatureMatrix/TargetVector invariants: finite, non-empty, paired."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidInputError("feature matrix must be 2-D with at least one row and column")
    check_finite(X, "feature matrix")
    if y is None:
        return X, None
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise InvalidInputError("target vector length must match feature matrix rows")
    check_finite(y, "target vector")
    return X, y


@dataclass
class GbmModel:
    """Additive ensemble: prediction = f0 + gamma * sum_m rho_m * tree_m(x)."""

    f0: float
    trees: list[RegressionTree] = field(default_factory=list)
    rhos: list[float] = field(default_factory=list)
    gamma: float = 1.0
    hyperparams: GbmHyperparams = field(default_factory=GbmHyperparams)
    n_features: int = 0

    @property
    def n_stages(self) -> int:
        return len(self.trees)
