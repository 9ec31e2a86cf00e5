import numpy as np
import pytest

from conftest import single_stump_model, stump
from hetboost.boosting import Ensemble
from hetboost.data import FeatureMeta, TabularDataset
from hetboost.dependence import (
    Grid,
    build_curve_set,
    cpdp,
    grid_support,
    ice,
    ice_matrix,
    make_grid,
    pdp,
    rug,
    write_curves_csv,
    write_rug_csv,
)
from hetboost.errors import NumericalError


def dataset_from(X, groups=None):
    X = np.asarray(X, dtype=float)
    n, m = X.shape
    meta = tuple(FeatureMeta(f"x{j + 1}", "predictor") for j in range(m)) + (
        FeatureMeta("y", "target"),
        FeatureMeta("g", "group_label"),
    )
    groups = groups if groups is not None else ["g"] * n
    return TabularDataset(X, np.zeros(n), groups, meta)


class TestMakeGrid:
    def test_uniform_three_points(self):
        data = dataset_from([[0.0], [4.0], [10.0]])
        grid = make_grid(data, 0, strategy="uniform", count=3)
        assert np.array_equal(grid.points, [0.0, 5.0, 10.0])

    def test_quantile_dedup(self):
        data = dataset_from([[1.0], [1.0], [1.0], [2.0]])
        grid = make_grid(data, 0, strategy="quantile", count=4)
        assert np.array_equal(grid.points, [1.0, 2.0])

    def test_count_one_rejected(self):
        data = dataset_from([[0.0], [1.0]])
        with pytest.raises(ValueError):
            make_grid(data, 0, count=1)

    def test_constant_feature_degenerate(self):
        data = dataset_from([[3.0], [3.0]])
        with pytest.raises(NumericalError):
            make_grid(data, 0)

    def test_by_name(self):
        data = dataset_from([[0.0, 5.0], [1.0, 6.0]])
        grid = make_grid(data, "x2", strategy="uniform", count=2)
        assert grid.feature == 1

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            Grid(0, np.array([1.0]), "uniform")
        with pytest.raises(ValueError):
            Grid(0, np.array([1.0, 1.0]), "uniform")


class TestIce:
    def test_model_ignoring_feature_gives_constant_rows(self, rng):
        model = single_stump_model(feature=0, n_features=2)
        data = dataset_from(rng.normal(size=(10, 2)))
        grid = make_grid(data, 1, strategy="uniform", count=4)
        matrix = ice(model, data, grid)
        preds = model.predict(data.X)
        for t in range(4):
            assert np.array_equal(matrix[:, t], preds)

    def test_hand_stump_sweep(self, rng):
        model = single_stump_model(base=1.0)
        data = dataset_from(rng.normal(size=(7, 1)))
        matrix = ice_matrix(model, data.X, 0, np.array([0.0, 1.0]))
        assert np.all(matrix == np.array([0.0, 2.0]))

    def test_single_row_ice_equals_pdp(self, rng):
        model = single_stump_model(base=1.0)
        data = dataset_from(rng.normal(size=(1, 1)))
        grid = make_grid(dataset_from([[0.0], [1.0]]), 0, "uniform", 3)
        matrix = ice(model, data, grid)
        assert np.array_equal(pdp(matrix), matrix[0])


class TestPdp:
    def test_column_means(self):
        assert np.array_equal(pdp(np.array([[0.0, 2.0], [2.0, 0.0]])), [1.0, 1.0])

    def test_constant_model(self):
        assert np.all(pdp(np.full((5, 3), 4.2)) == 4.2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            pdp(np.zeros((0, 3)))


class TestCpdp:
    def test_single_group_equals_pdp(self, rng):
        matrix = rng.normal(size=(8, 3))
        curves, warnings = cpdp(matrix, ["only"] * 8)
        assert warnings == []
        assert np.array_equal(curves["only"][0], pdp(matrix))

    def test_two_group_identity(self):
        matrix = np.array([[0.0, 2.0], [2.0, 0.0]])
        curves, _ = cpdp(matrix, ["a", "b"])
        assert np.array_equal(curves["a"][0], [0.0, 2.0])
        assert np.array_equal(curves["b"][0], [2.0, 0.0])
        weighted = 0.5 * curves["a"][0] + 0.5 * curves["b"][0]
        assert np.array_equal(weighted, pdp(matrix))

    def test_group_means_exact_per_group(self, rng):
        matrix = rng.normal(size=(30, 4))
        groups = rng.choice(["a", "b", "c"], size=30)
        curves, _ = cpdp(matrix, groups)
        for label, (curve, n_g) in curves.items():
            rows = matrix[groups == label]
            assert n_g == rows.shape[0]
            assert np.array_equal(curve, rows.mean(axis=0))

    def test_weighted_average_reproduces_pdp(self, rng):
        for _ in range(10):
            n = int(rng.integers(5, 60))
            matrix = rng.normal(size=(n, 6)) * 10
            groups = rng.choice(list("abcd"), size=n)
            curves, _ = cpdp(matrix, groups)
            weighted = sum(ng * curve for curve, ng in curves.values()) / n
            assert np.abs(weighted - pdp(matrix)).max() <= 1e-12

    def test_empty_requested_group_warns(self, rng):
        matrix = rng.normal(size=(4, 2))
        curves, warnings = cpdp(matrix, ["a"] * 4, labels=["a", "ghost"])
        assert "ghost" not in curves
        assert any("ghost" in w for w in warnings)


class TestCurveProperties:
    def test_flat_when_feature_unused(self, rng):
        model = single_stump_model(feature=0, n_features=2)
        data = dataset_from(rng.normal(size=(12, 2)), groups=["a"] * 6 + ["b"] * 6)
        grid = make_grid(data, 1, "uniform", 9)
        cs = build_curve_set(model, data, grid)
        assert np.ptp(cs.global_pdp) == 0.0
        for curve, _ in cs.per_group.values():
            assert np.ptp(curve) == 0.0

    def test_monotone_model_gives_monotone_pdp(self, rng):
        trees = [stump(0, 0.3, -1.0, 1.0), stump(0, 0.6, -0.5, 2.0)]
        model = Ensemble(0.0, 0.7, trees, 1)
        data = dataset_from(rng.random(size=(20, 1)))
        grid = make_grid(data, 0, "uniform", 15)
        curve = pdp(ice(model, data, grid))
        assert np.all(np.diff(curve) >= 0)

    def test_grid_permutation_invariance(self, rng):
        model = single_stump_model(base=1.0)
        X = rng.random(size=(9, 1))
        points = np.linspace(0, 1, 8)
        perm = rng.permutation(8)
        direct = ice_matrix(model, X, 0, points)
        permuted = ice_matrix(model, X, 0, points[perm])
        unpermuted = np.empty_like(permuted)
        unpermuted[:, perm] = permuted
        assert np.array_equal(direct, unpermuted)


class TestRugAndSupport:
    def test_uniform_deciles(self):
        data = dataset_from(np.arange(1.0, 11.0).reshape(10, 1))
        marks = rug(data, 0)
        expected = np.quantile(np.arange(1.0, 11.0), np.arange(0.1, 1.0, 0.1))
        assert np.allclose(marks.global_deciles, expected)
        assert marks.global_deciles[0] == pytest.approx(1.9)
        assert marks.global_deciles[-1] == pytest.approx(9.1)

    def test_two_mass_points_collapse(self):
        data = dataset_from(np.array([[0.0]] * 5 + [[1.0]] * 5))
        marks = rug(data, 0)
        assert set(np.round(marks.global_deciles, 12)) <= {0.0, 0.5, 1.0}

    def test_disjoint_groups_disjoint_deciles(self):
        X = np.concatenate([np.linspace(0, 1, 10), np.linspace(5, 6, 10)])
        data = dataset_from(X.reshape(-1, 1), groups=["lo"] * 10 + ["hi"] * 10)
        marks = rug(data, 0)
        assert marks.per_group["lo"].max() < marks.per_group["hi"].min()

    def test_support_counts_and_flags(self):
        X = np.array([[0.0]] * 98 + [[10.0]] * 2)
        data = dataset_from(X)
        grid = Grid(0, np.array([0.0, 5.0, 10.0]), "uniform")
        support = grid_support(data, grid)
        counts, flags = support["global"]
        assert counts.tolist() == [98, 0, 2]
        assert flags.tolist() == [False, True, False]
        assert counts.sum() == data.n


class TestCurveSetExport:
    def test_long_format_and_identities(self, rng, tmp_path):
        model = Ensemble(
            0.5, 0.8, [stump(0, 0.4, -1.0, 2.0), stump(1, 0.0, 0.3, -0.3)], 2
        )
        X = rng.normal(size=(40, 2))
        data = dataset_from(X, groups=list(rng.choice(["a", "b"], size=40)))
        grid = make_grid(data, 0, "quantile", 12)
        cs = build_curve_set(model, data, grid, include_ice=True)

        assert np.array_equal(pdp(cs.ice), cs.global_pdp)
        total = sum(ng for _, ng in cs.per_group.values())
        assert total == data.n
        weighted = sum(ng * c for c, ng in cs.per_group.values()) / total
        assert np.abs(weighted - cs.global_pdp).max() <= 1e-12

        write_curves_csv([cs], tmp_path / "curves.csv")
        write_rug_csv([cs], tmp_path / "rug.csv")
        lines = (tmp_path / "curves.csv").read_text().strip().splitlines()
        assert lines[0] == "feature,grid_value,scope,estimate,n_scope,low_support"
        n_points = cs.grid.points.size
        assert len(lines) == 1 + 3 * n_points  # global + 2 groups
        rug_lines = (tmp_path / "rug.csv").read_text().strip().splitlines()
        assert rug_lines[0] == "feature,scope,decile,value"
        assert len(rug_lines) == 1 + 3 * 9
