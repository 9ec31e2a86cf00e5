import numpy as np
import pytest

from hetboost.boosting import TrainConfig, fit_arrays
from hetboost.data import FeatureMeta, TabularDataset
from hetboost.errors import TuningError
from hetboost.tuning import (
    TuningGrid,
    default_grid,
    grid_search,
    kfold_split,
    write_cv_csv,
)


def make_dataset(rng, n=90, m=2):
    X = rng.normal(size=(n, m))
    y = X[:, 0] * X[:, 1] + 0.3 * rng.normal(size=n)
    meta = tuple(FeatureMeta(f"f{i}", "predictor") for i in range(m)) + (
        FeatureMeta("y", "target"),
        FeatureMeta("g", "group_label"),
    )
    return TabularDataset(X, y, ["g"] * n, meta)


class TestKfold:
    def test_even_sizes(self):
        folds = kfold_split(10, 5, seed=3)
        assert [f.size for f in folds] == [2, 2, 2, 2, 2]

    def test_uneven_sizes(self):
        folds = kfold_split(11, 5, seed=3)
        assert sorted(f.size for f in folds) == [2, 2, 2, 2, 3]

    def test_disjoint_cover(self):
        folds = kfold_split(23, 4, seed=11)
        merged = np.concatenate(folds)
        assert sorted(merged) == list(range(23))

    def test_deterministic(self):
        a = kfold_split(40, 5, seed=9)
        b = kfold_split(40, 5, seed=9)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            kfold_split(10, 1)
        with pytest.raises(ValueError):
            kfold_split(4, 5)


class TestGrid:
    def test_default_grid_counts(self):
        grid = default_grid()
        assert grid.tree_counts == tuple(range(100, 201, 10))
        assert grid.learning_rates == (0.01, 0.02, 0.03, 0.04, 0.05)
        assert grid.n_configs == 55

    def test_must_be_increasing(self):
        with pytest.raises(ValueError):
            TuningGrid(tree_counts=(10, 10), learning_rates=(0.1,))
        with pytest.raises(ValueError):
            TuningGrid(tree_counts=(10,), learning_rates=(0.2, 0.1))
        with pytest.raises(ValueError):
            TuningGrid(tree_counts=(), learning_rates=(0.1,))


class TestGridSearch:
    def test_singleton_grid(self, rng):
        data = make_dataset(rng, n=40)
        grid = TuningGrid(
            tree_counts=(8,), learning_rates=(0.3,),
            base=TrainConfig(max_depth=3),
        )
        best, results = grid_search(data, grid, k=4, seed=5)
        assert len(results) == 1
        assert best.n_trees == 8 and best.learning_rate == 0.3
        assert results[0].mean_rmse == pytest.approx(
            float(np.mean(results[0].fold_rmse))
        )

    def test_best_attains_table_minimum_and_tie_rule(self, rng):
        data = make_dataset(rng)
        grid = TuningGrid(
            tree_counts=(5, 10, 20), learning_rates=(0.1, 0.3),
            base=TrainConfig(max_depth=3),
        )
        best, results = grid_search(data, grid, k=5, seed=2)
        best_mean = min(r.mean_rmse for r in results)
        chosen = [r for r in results if r.config.n_trees == best.n_trees
                  and r.config.learning_rate == best.learning_rate]
        assert chosen[0].mean_rmse == best_mean
        contenders = [r for r in results if r.mean_rmse == best_mean]
        assert min((r.config.n_trees, r.config.learning_rate) for r in contenders) \
            == (best.n_trees, best.learning_rate)

    def test_identical_folds_across_configs(self, rng):
        data = make_dataset(rng, n=50)
        grid = TuningGrid(
            tree_counts=(4, 8), learning_rates=(0.2, 0.4),
            base=TrainConfig(max_depth=2),
        )
        _, results = grid_search(data, grid, k=3, seed=1)
        assert len({r.fold_hash for r in results}) == 1

    def test_matches_independent_refit_loop(self, rng):
        # oracle: naive per-config refits with the same folds
        data = make_dataset(rng, n=60)
        grid = TuningGrid(
            tree_counts=(3, 7), learning_rates=(0.15, 0.45),
            base=TrainConfig(max_depth=3),
        )
        k, seed = 4, 13
        best, results = grid_search(data, grid, k=k, seed=seed)
        folds = kfold_split(data.n, k, seed)
        expected = {}
        for n_trees in grid.tree_counts:
            for rate in grid.learning_rates:
                cfg = TrainConfig(n_trees=n_trees, learning_rate=rate, max_depth=3)
                rmses = []
                for fold in folds:
                    train = np.ones(data.n, dtype=bool)
                    train[fold] = False
                    model = fit_arrays(data.X[train], data.y[train], cfg)
                    pred = model.predict(data.X[fold])
                    rmses.append(float(np.sqrt(np.mean((data.y[fold] - pred) ** 2))))
                expected[(n_trees, rate)] = rmses
        for r in results:
            key = (r.config.n_trees, r.config.learning_rate)
            assert np.allclose(r.fold_rmse, expected[key], atol=1e-12)
        naive_best = min(
            expected.items(), key=lambda kv: (float(np.mean(kv[1])), kv[0])
        )[0]
        assert (best.n_trees, best.learning_rate) == naive_best

    def test_deterministic_under_seed(self, rng):
        data = make_dataset(rng, n=45)
        grid = TuningGrid(
            tree_counts=(4,), learning_rates=(0.2, 0.5),
            base=TrainConfig(max_depth=2),
        )
        r1 = grid_search(data, grid, k=3, seed=8)
        r2 = grid_search(data, grid, k=3, seed=8)
        assert r1 == r2

    def test_fit_error_identifies_config(self, rng):
        # two rows split into two folds: every training split is a single
        # row, which fit rejects; the abort must name the config
        data = make_dataset(rng, n=2)
        grid = TuningGrid(tree_counts=(4,), learning_rates=(0.2,))
        with pytest.raises(TuningError, match="learning_rate=0.2"):
            grid_search(data, grid, k=2, seed=0)

    def test_csv_export(self, rng, tmp_path):
        data = make_dataset(rng, n=40)
        grid = TuningGrid(
            tree_counts=(3, 6), learning_rates=(0.25,),
            base=TrainConfig(max_depth=2),
        )
        best, results = grid_search(data, grid, k=3, seed=4)
        path = tmp_path / "cv.csv"
        write_cv_csv(results, best, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "n_trees,learning_rate,fold_1,fold_2,fold_3,mean_rmse,selected"
        assert len(lines) == 3
        assert sum(line.endswith(",1") for line in lines[1:]) == 1
