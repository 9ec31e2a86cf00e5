import numpy as np
import pytest

from hetboost import _backend
from hetboost.boosting import Ensemble, RegressionTree, TrainConfig, fit_arrays


def naive_predict(model, X):
    """Independent tree walker: recomputes predictions without the routing
    kernels, for use as an oracle."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = []
    for row in X:
        total = 0.0
        for tree in model.trees:
            node = 0
            while tree.feature[node] >= 0:
                if row[tree.feature[node]] < tree.threshold[node]:
                    node = int(tree.left[node])
                else:
                    node = int(tree.right[node])
            total += float(tree.weight[node])
        out.append(model.base_score + model.learning_rate * total)
    return np.asarray(out)


def random_model(rng, n_rows=60, n_features=4, n_trees=10, max_depth=3,
                 learning_rate=0.3, kernels=None):
    """Fit a small ensemble on random data with some real structure."""
    X = rng.normal(size=(n_rows, n_features))
    y = rng.normal(size=n_rows) + 2.0 * X[:, 0] + 3.0 * (X[:, n_features - 1] > 0)
    cfg = TrainConfig(n_trees=n_trees, learning_rate=learning_rate, max_depth=max_depth)
    return fit_arrays(X, y, cfg, kernels=kernels), X


def stump(feature, threshold, left_weight, right_weight, cover=(2, 1, 1)):
    """Hand-built depth-1 tree."""
    return RegressionTree(
        feature=[feature, -1, -1],
        threshold=[threshold, 0.0, 0.0],
        left=[1, -1, -1],
        right=[2, -1, -1],
        weight=[0.0, left_weight, right_weight],
        cover=list(cover),
    )


def single_stump_model(feature=0, threshold=0.5, left=-1.0, right=1.0,
                       base=0.0, learning_rate=1.0, n_features=1):
    return Ensemble(base, learning_rate, [stump(feature, threshold, left, right)], n_features)


@pytest.fixture(params=_backend.available())
def kernels(request):
    """Run a test once per importable kernel backend."""
    return _backend.get(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
