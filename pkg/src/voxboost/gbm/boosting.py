"""Stagewise boosting over penalized regression trees.

Training starts from the squared-loss-optimal constant (the target mean)
and repeats, for each stage: draw a row subsample, compute pseudo
residuals ``g_i = y_i - F(x_i)`` against the current ensemble, fit a tree
to the subsample's residuals, then find the stage weight ``rho`` on the
full training set as the minimizer of

    0.5 * sum_i (g_i - rho * f_i)^2 + 0.5 * lam * rho^2 + alpha * |rho|

(closed form ``soft_threshold(sum g_i f_i, alpha) / (sum f_i^2 + lam)``),
and update ``F <- F + learning_rate * rho * f``.  Everything is
deterministic given the hyperparameter seed; reductions use ``math.fsum``
so results are also invariant to training-row order when subsample = 1.

Fitted models are immutable and safe to share across threads; a fit call
confines all mutable state to its own locals.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidInputError
from ..rng import make_rng
from ..tabular import check_finite
from .trees import _PresortedData, _build_tree, soft_threshold
from .types import GbmHyperparams, GbmModel, validate_xy


def init_estimator(y: np.ndarray) -> float:
    """Constant minimizing the squared loss: the mean of y."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise InvalidInputError("init_estimator requires a non-empty target vector")
    check_finite(y, "target vector")
    return math.fsum(y.tolist()) / y.size


def pseudo_residuals(y: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Negative gradient of 0.5*(y - F)^2, i.e. y - F."""
    y = np.asarray(y, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if y.shape != F.shape or y.ndim != 1:
        raise InvalidInputError("pseudo_residuals requires equal-length vectors")
    check_finite(y, "target vector")
    check_finite(F, "prediction vector")
    return y - F


def line_search_rho(residual: np.ndarray, tree_pred: np.ndarray,
                    lam: float, alpha: float) -> float:
    """Optimal penalized stage weight for one fitted tree."""
    r = np.asarray(residual, dtype=np.float64)
    f = np.asarray(tree_pred, dtype=np.float64)
    if r.shape != f.shape or r.ndim != 1 or r.size == 0:
        raise InvalidInputError("line_search_rho requires equal-length non-empty vectors")
    if lam < 0.0 or alpha < 0.0:
        raise InvalidInputError("penalty weights lam and alpha must be >= 0")
    sff = math.fsum((f * f).tolist())
    if sff == 0.0:
        return 0.0
    srf = math.fsum((r * f).tolist())
    return soft_threshold(srf, alpha) / (sff + lam)


def subsample_rows(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """ceil(fraction * n) distinct rows, uniform without replacement, ascending."""
    if n < 1:
        raise InvalidInputError("subsample_rows requires n >= 1")
    if not (0.0 < fraction <= 1.0):
        raise InvalidInputError(f"subsample fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return np.arange(n, dtype=np.int64)
    k = math.ceil(fraction * n)
    chosen = rng.permutation(n)[:k]
    chosen.sort()
    return chosen.astype(np.int64)


def fit(X: np.ndarray, y: np.ndarray, hp: GbmHyperparams) -> GbmModel:
    """Train the full ensemble; deterministic given hp.seed."""
    hp.validate()
    X, y = validate_xy(X, y)
    n = X.shape[0]
    data = _PresortedData(X)
    rng = make_rng(hp.seed)

    f0 = init_estimator(y)
    F = np.full(n, f0, dtype=np.float64)
    trees = []
    rhos = []
    for _ in range(hp.n_trees):
        rows = subsample_rows(n, hp.subsample, rng)
        g = pseudo_residuals(y, F)
        tree = _build_tree(data, g, data.restrict(rows), hp.max_depth, hp.lam, hp.alpha)
        pred = tree.predict(X)
        rho = line_search_rho(g, pred, hp.lam, hp.alpha)
        F = F + hp.learning_rate * rho * pred
        trees.append(tree)
        rhos.append(rho)
    return GbmModel(f0=f0, trees=trees, rhos=rhos, gamma=hp.learning_rate,
                    hyperparams=hp, n_features=X.shape[1])


def _check_predict_input(model: GbmModel, X: np.ndarray) -> np.ndarray:
    X, _ = validate_xy(X)
    if X.shape[1] != model.n_features:
        raise InvalidInputError(
            f"model was trained on {model.n_features} features, got {X.shape[1]}")
    return X


def predict(model: GbmModel, X: np.ndarray) -> np.ndarray:
    """f0 + gamma * sum_m rho_m * tree_m(x), accumulated in stage order."""
    X = _check_predict_input(model, X)
    F = np.full(X.shape[0], model.f0, dtype=np.float64)
    for tree, rho in zip(model.trees, model.rhos):
        F += model.gamma * rho * tree.predict(X)
    return F


def staged_predict(model: GbmModel, X: np.ndarray) -> list[np.ndarray]:
    """Predictions after 0, 1, ..., n_stages stages; last equals predict."""
    X = _check_predict_input(model, X)
    F = np.full(X.shape[0], model.f0, dtype=np.float64)
    out = [F.copy()]
    for tree, rho in zip(model.trees, model.rhos):
        F = F + model.gamma * rho * tree.predict(X)
        out.append(F.copy())
    return out
