"""The compiled extension and the numpy fallback must agree bit for bit."""

import numpy as np
import pytest

from hetboost import _backend
from hetboost.boosting import TrainConfig, fit_arrays
from hetboost.shapley import shap_exact, shap_tree_matrix

needs_both = pytest.mark.skipif(
    "compiled" not in _backend.available(),
    reason="compiled extension not built",
)


@pytest.fixture
def both():
    return _backend.get("python"), _backend.get("compiled")


@needs_both
class TestKernelEquality:
    def test_split_scan(self, both, rng):
        py, cy = both
        for _ in range(200):
            n = int(rng.integers(2, 60))
            # duplicate-heavy values exercise the distinct-boundary rule
            col = rng.choice(np.round(rng.normal(size=6), 2), size=n)
            g = rng.normal(size=n)
            order = np.argsort(col, kind="stable")
            mask = (rng.random(n) < 0.7).astype(np.uint8)
            lam = float(rng.choice([0.0, 1.0, 5.0]))
            gamma = float(rng.choice([0.0, 0.2]))
            cover = int(rng.choice([1, 2, 5]))
            a = py.split_scan(order, mask, col, g, lam, gamma, cover)
            b = cy.split_scan(order, mask, col, g, lam, gamma, cover)
            if np.isnan(a[1]):
                assert np.isnan(b[1]) and a[0] == b[0] and a[2] == b[2]
            else:
                assert a == b

    def test_route_rows(self, both, rng):
        py, cy = both
        model, _ = _random_fit(rng, py)
        X = np.ascontiguousarray(rng.normal(size=(300, model.n_features)))
        for tree in model.trees:
            assert np.array_equal(
                py.route_rows(tree.feature, tree.threshold, tree.left, tree.right, X),
                cy.route_rows(tree.feature, tree.threshold, tree.left, tree.right, X),
            )

    def test_fit_bit_identical(self, both, rng):
        py, cy = both
        for _ in range(5):
            n, m = int(rng.integers(20, 120)), int(rng.integers(1, 6))
            X = rng.normal(size=(n, m))
            y = rng.normal(size=n) + X[:, 0]
            cfg = TrainConfig(
                n_trees=int(rng.integers(1, 25)),
                learning_rate=float(rng.uniform(0.05, 1.0)),
                max_depth=int(rng.integers(1, 6)),
                reg_lambda=float(rng.choice([0.0, 1.0, 3.0])),
                gamma=float(rng.choice([0.0, 0.1])),
                min_child_cover=int(rng.choice([1, 3])),
            )
            a = fit_arrays(X, y, cfg, kernels=py)
            b = fit_arrays(X, y, cfg, kernels=cy)
            assert a.equals(b)
            assert a.training_rmse == b.training_rmse

    def test_shap_bit_identical(self, both, rng):
        py, cy = both
        model, X = _random_fit(rng, py)
        Z = X[:9]
        explain = X[:40]
        base_py, phi_py = shap_tree_matrix(model, explain, Z, kernels=py)
        base_cy, phi_cy = shap_tree_matrix(model, explain, Z, kernels=cy)
        assert base_py == base_cy
        assert np.array_equal(phi_py, phi_cy)

    def test_exact_shap_backend_independent(self, both, rng):
        py, cy = both
        model, X = _random_fit(rng, py, m=4)
        row_py = shap_exact(model, X[0], X[:6], kernels=py)
        row_cy = shap_exact(model, X[0], X[:6], kernels=cy)
        assert row_py.base == row_cy.base
        assert np.array_equal(row_py.phi, row_cy.phi)


def _random_fit(rng, kernels, m=5):
    n = 150
    X = rng.normal(size=(n, m))
    y = rng.normal(size=n) + np.sin(2 * X[:, 0]) + (X[:, m - 1] > 0.5)
    model = fit_arrays(
        X, y, TrainConfig(n_trees=15, learning_rate=0.3, max_depth=4),
        kernels=kernels,
    )
    return model, X


@needs_both
def test_select_swaps_active_backend():
    previous = _backend.active.BACKEND_NAME
    other = "python" if previous == "compiled" else "compiled"
    try:
        assert _backend.select(other) == previous
        assert _backend.active.BACKEND_NAME == other
    finally:
        _backend.select(previous)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _backend.get("fortran")
