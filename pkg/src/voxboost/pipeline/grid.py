"""Two-stage hyperparameter grid search.

Stage one evaluates the full coarse product grid (training on the train
fold, scoring validation MSE); stage two rebuilds a fine grid around the
coarse winner -- multiplicative factors on the learning rate crossed with
a depth neighborhood, tree count and penalties pinned -- and re-evaluates.
The ``x1.0`` factor keeps the coarse winner inside the fine grid, so the
final argmin can only improve on stage one.  Ties resolve to the first
configuration in enumeration order; every evaluation is logged.

Configurations are independent, so ``workers > 1`` fans them out to a
process pool; results are reassembled in enumeration order, keeping the
selection identical to a sequential run.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from multiprocessing import get_context

import numpy as np

from ..errors import ConfigError
from ..gbm import GbmHyperparams, fit, predict
from ..tabular import mean_squared_error


@dataclass(frozen=True)
class GridSpec:
    """Coarse candidate lists plus the fine-stage neighborhood rule."""

    learning_rates: tuple[float, ...] = (0.003, 0.01, 0.03)
    n_trees: tuple[int, ...] = (150,)
    max_depths: tuple[int, ...] = (3, 5)
    lams: tuple[float, ...] = (1.05,)
    alphas: tuple[float, ...] = (0.1,)
    fine_lr_factors: tuple[float, ...] = (0.6, 0.8, 1.0, 1.25, 1.67)
    fine_depth_delta: int = 2
    subsample: float = 0.8
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rates", "n_trees", "max_depths", "lams",
                     "alphas", "fine_lr_factors"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ConfigError(f"grid list {name} must not be empty")
        if self.fine_depth_delta < 0:
            raise ConfigError("fine_depth_delta must be >= 0")

    @classmethod
    def wide(cls, subsample: float = 0.8, seed: int = 0) -> "GridSpec":
        """The full bracketing grid; expensive, intended for long runs."""
        return cls(learning_rates=(0.001, 0.003, 0.01, 0.03, 0.1),
                   n_trees=(250, 500, 1000), max_depths=(3, 5, 7),
                   lams=(0.0, 1.05), alphas=(0.0, 0.1),
                   subsample=subsample, seed=seed)

    def coarse_configs(self) -> list[GbmHyperparams]:
        out = []
        for lr, m, depth, lam, alpha in product(
                self.learning_rates, self.n_trees, self.max_depths,
                self.lams, self.alphas):
            out.append(GbmHyperparams(learning_rate=lr, n_trees=m, max_depth=depth,
                                      lam=lam, alpha=alpha, subsample=self.subsample,
                                      seed=self.seed).validate())
        return out

    def fine_configs(self, winner: GbmHyperparams) -> list[GbmHyperparams]:
        """Neighborhood around the coarse winner, clamped to legal ranges."""
        out = []
        seen = set()
        for factor in self.fine_lr_factors:
            lr = min(max(winner.learning_rate * factor, 1e-12), 1.0)
            for delta in (-self.fine_depth_delta, 0, self.fine_depth_delta):
                depth = max(winner.max_depth + delta, 1)
                key = (lr, depth)
                if key in seen:
                    continue
                seen.add(key)
                out.append(GbmHyperparams(
                    learning_rate=lr, n_trees=winner.n_trees, max_depth=depth,
                    lam=winner.lam, alpha=winner.alpha,
                    subsample=self.subsample, seed=self.seed).validate())
        return out


@dataclass
class GridRow:
    stage: str  # "coarse" | "fine"
    index: int  # enumeration index within the stage
    hp: GbmHyperparams
    val_mse: float


_WORKER_DATA: dict = {}


def _init_worker(X_train, y_train, X_val, y_val):
    _WORKER_DATA["data"] = (X_train, y_train, X_val, y_val)


def _eval_in_worker(hp: GbmHyperparams) -> float:
    X_train, y_train, X_val, y_val = _WORKER_DATA["data"]
    model = fit(X_train, y_train, hp)
    return mean_squared_error(y_val, predict(model, X_val))


def _evaluate_stage(configs, stage, X_train, y_train, X_val, y_val, workers):
    if workers > 1 and len(configs) > 1:
        ctx = get_context("fork")
        with ctx.Pool(processes=min(workers, len(configs)),
                      initializer=_init_worker,
                      initargs=(X_train, y_train, X_val, y_val)) as pool:
            mses = pool.map(_eval_in_worker, configs)
    else:
        _init_worker(X_train, y_train, X_val, y_val)
        mses = [_eval_in_worker(hp) for hp in configs]
    return [GridRow(stage=stage, index=i, hp=hp, val_mse=mse)
            for i, (hp, mse) in enumerate(zip(configs, mses))]


def _argmin_row(rows: list[GridRow]) -> GridRow:
    best = rows[0]
    for row in rows[1:]:
        if row.val_mse < best.val_mse:
            best = row
    return best


def two_stage_grid_search(X_train: np.ndarray, y_train: np.ndarray,
                          X_val: np.ndarray, y_val: np.ndarray,
                          grid: GridSpec, workers: int = 1):
    """Returns (best hyperparams, all GridRow logs in evaluation order)."""
    coarse = grid.coarse_configs()
    if not coarse:
        raise ConfigError("empty coarse grid")
    rows = _evaluate_stage(coarse, "coarse", X_train, y_train, X_val, y_val, workers)
    coarse_winner = _argmin_row(rows)
    fine = grid.fine_configs(coarse_winner.hp)
    fine_rows = _evaluate_stage(fine, "fine", X_train, y_train, X_val, y_val, workers)
    rows.extend(fine_rows)
    best = _argmin_row(rows)
    return best.hp, rows
