"""Exhaustive grid search over (tree count, learning rate) with k-fold CV.

Every configuration is scored on the same seeded fold partition; the winner
minimizes mean validation RMSE, with ties broken toward fewer trees and then
a smaller learning rate.  Because boosting is prefix-stable (tree k depends
only on trees before it), all tree counts for one learning rate are read off
a single fit at the largest count; this is exactly equivalent to refitting
each count separately.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .boosting import TrainConfig, fit_arrays
from .errors import TuningError


@dataclass(frozen=True)
class TuningGrid:
    tree_counts: tuple[int, ...]
    learning_rates: tuple[float, ...]
    base: TrainConfig = TrainConfig()

    def __post_init__(self):
        for name, values in (("tree_counts", self.tree_counts),
                             ("learning_rates", self.learning_rates)):
            if not values:
                raise ValueError(f"{name} must be nonempty")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if self.tree_counts[0] < 1:
            raise ValueError("tree counts must be positive")
        if self.learning_rates[0] <= 0 or self.learning_rates[-1] > 1:
            raise ValueError("learning rates must lie in (0, 1]")

    @property
    def n_configs(self):
        return len(self.tree_counts) * len(self.learning_rates)


def default_grid(base=None):
    """The stock search space: 100..200 trees in steps of 10 crossed with
    learning rates 0.01..0.05 in steps of 0.01 (55 configurations)."""
    return TuningGrid(
        tree_counts=tuple(range(100, 201, 10)),
        learning_rates=(0.01, 0.02, 0.03, 0.04, 0.05),
        base=base or TrainConfig(),
    )


@dataclass(frozen=True)
class CvResult:
    config: TrainConfig
    fold_rmse: tuple[float, ...]
    mean_rmse: float
    fold_hash: str


def kfold_split(n, k, seed=0):
    """Partition range(n) into k seeded random folds with sizes differing by
    at most one."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return [fold.copy() for fold in np.array_split(perm, k)]


def _hash_folds(folds):
    digest = hashlib.sha256()
    for fold in folds:
        digest.update(fold.astype(np.int64).tobytes())
        digest.update(b"|")
    return digest.hexdigest()[:16]


def grid_search(data, grid: TuningGrid, k=5, seed=0, kernels=None):
    """Evaluate every grid configuration with shared folds.

    Returns (best TrainConfig, full list of CvResult in grid order:
    tree counts outer, learning rates inner).
    """
    n = data.n
    folds = kfold_split(n, k, seed)
    fold_hash = _hash_folds(folds)
    k_max = max(grid.tree_counts)

    # val_curves[rate_idx][fold_idx][t] = fold RMSE with t trees
    val_curves = []
    for rate in grid.learning_rates:
        per_fold = []
        for fi, fold in enumerate(folds):
            train_mask = np.ones(n, dtype=bool)
            train_mask[fold] = False
            try:
                config = replace(grid.base, n_trees=k_max, learning_rate=rate)
                _, curve = fit_arrays(
                    data.X[train_mask], data.y[train_mask], config,
                    eval_set=(data.X[fold], data.y[fold]),
                    kernels=kernels,
                )
            except Exception as exc:
                raise TuningError(
                    f"fit failed for learning_rate={rate}, n_trees<={k_max}, "
                    f"fold {fi + 1}/{k}: {exc}"
                ) from exc
            per_fold.append(curve)
        val_curves.append(per_fold)

    results = []
    for n_trees in grid.tree_counts:
        for ri, rate in enumerate(grid.learning_rates):
            fold_rmse = tuple(val_curves[ri][fi][n_trees] for fi in range(k))
            results.append(
                CvResult(
                    config=replace(grid.base, n_trees=n_trees, learning_rate=rate),
                    fold_rmse=fold_rmse,
                    mean_rmse=float(np.mean(fold_rmse)),
                    fold_hash=fold_hash,
                )
            )

    best = min(
        results,
        key=lambda r: (r.mean_rmse, r.config.n_trees, r.config.learning_rate),
    )
    return best.config, results


def write_cv_csv(results, best_config, path):
    """CSV export: n_trees, learning_rate, fold_1..fold_k, mean_rmse, selected."""
    if not results:
        raise ValueError("no results to write")
    k = len(results[0].fold_rmse)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["n_trees", "learning_rate"]
            + [f"fold_{i + 1}" for i in range(k)]
            + ["mean_rmse", "selected"]
        )
        for r in results:
            selected = (
                r.config.n_trees == best_config.n_trees
                and r.config.learning_rate == best_config.learning_rate
            )
            writer.writerow(
                [r.config.n_trees, repr(float(r.config.learning_rate))]
                + [repr(float(v)) for v in r.fold_rmse]
                + [repr(float(r.mean_rmse)), int(selected)]
            )
