"""Second-order gradient-boosted regression trees for squared-error loss.

Each round fits one regression tree to the current residuals with the
standard second-order statistics (per-row gradient g = prediction - target,
hessian h = 1).  Split candidates are midpoints between consecutive distinct
sorted feature values; the chosen split maximizes

    0.5 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma

and a leaf's weight is -G/(H+lambda).  Everything is deterministic: ties are
broken by lowest feature index, then smallest threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend

MODEL_FORMAT = "hetboost-ensemble"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 200
    learning_rate: float = 0.05
    max_depth: int = 5
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_cover: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        # 0 is allowed as a degenerate diagnostic setting (no update per round)
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in [0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.min_child_cover < 1:
            raise ValueError("min_child_cover must be >= 1")

    def to_dict(self):
        return {
            "n_trees": self.n_trees,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "reg_lambda": self.reg_lambda,
            "gamma": self.gamma,
            "min_child_cover": self.min_child_cover,
            "seed": self.seed,
        }


class RegressionTree:
    """Array-of-nodes binary tree.

    ``feature[i] == -1`` marks a leaf; internal nodes route a row left when
    its value on ``feature[i]`` is strictly below ``threshold[i]``.  ``cover``
    is the number of training rows that reached each node.
    """

    __slots__ = ("feature", "threshold", "left", "right", "weight", "cover")

    def __init__(self, feature, threshold, left, right, weight, cover):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.weight = np.asarray(weight, dtype=np.float64)
        self.cover = np.asarray(cover, dtype=np.int64)
        for arr in (self.feature, self.threshold, self.left, self.right, self.weight, self.cover):
            arr.setflags(write=False)

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def n_leaves(self):
        return int((self.feature < 0).sum())

    def route(self, X, kernels=None):
        """Leaf index reached by each row of ``X``."""
        kern = kernels or _backend.active
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kern.route_rows(self.feature, self.threshold, self.left, self.right, X)

    def leaf_values(self, X, kernels=None):
        return self.weight[self.route(X, kernels=kernels)]

    def depth(self):
        depths = {0: 0}
        out = 0
        for i in range(self.n_nodes):
            d = depths[i]
            out = max(out, d)
            if self.feature[i] >= 0:
                depths[int(self.left[i])] = d + 1
                depths[int(self.right[i])] = d + 1
        return out

    def validate(self, max_depth=None):
        """Check structural invariants; raises ValueError on violation."""
        n = self.n_nodes
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        for i in range(n):
            if self.feature[i] >= 0:
                l, r = int(self.left[i]), int(self.right[i])
                if not (0 <= l < n and 0 <= r < n) or l == r:
                    raise ValueError(f"node {i}: bad children ({l}, {r})")
                if seen[l] or seen[r]:
                    raise ValueError(f"node {i}: child referenced twice")
                seen[l] = seen[r] = True
                if self.cover[i] != self.cover[l] + self.cover[r]:
                    raise ValueError(f"node {i}: cover does not sum over children")
            else:
                if self.left[i] != -1 or self.right[i] != -1:
                    raise ValueError(f"leaf {i} has children")
        if not seen.all():
            raise ValueError("unreachable nodes present")
        if max_depth is not None and self.depth() > max_depth:
            raise ValueError(f"depth {self.depth()} exceeds limit {max_depth}")

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "weight": self.weight.tolist(),
            "cover": self.cover.tolist(),
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            raw["feature"], raw["threshold"], raw["left"],
            raw["right"], raw["weight"], raw["cover"],
        )

    def equals(self, other):
        return (
            isinstance(other, RegressionTree)
            and np.array_equal(self.feature, other.feature)
            and np.array_equal(self.threshold, other.threshold)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.weight, other.weight)
            and np.array_equal(self.cover, other.cover)
        )


@dataclass
class Ensemble:
    """Additive tree model: prediction = base_score + learning_rate * sum of
    routed leaf weights."""

    base_score: float
    learning_rate: float
    trees: list[RegressionTree]
    n_features: int
    training_rmse: tuple = field(default=(), repr=False, compare=False)

    def predict(self, X, kernels=None):
        """Prediction for a single feature vector or a 2-D batch."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features, got shape {X.shape}"
            )
        if not np.isfinite(X).all():
            raise ValueError("feature values must be finite")
        X = np.ascontiguousarray(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.leaf_values(X, kernels=kernels)
        out = self.base_score + self.learning_rate * total
        return float(out[0]) if single else out

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, raw):
        if raw.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} file")
        if raw.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {raw.get('version')}")
        return cls(
            base_score=float(raw["base_score"]),
            learning_rate=float(raw["learning_rate"]),
            trees=[RegressionTree.from_dict(t) for t in raw["trees"]],
            n_features=int(raw["n_features"]),
        )

    def equals(self, other):
        return (
            isinstance(other, Ensemble)
            and self.base_score == other.base_score
            and self.learning_rate == other.learning_rate
            and self.n_features == other.n_features
            and len(self.trees) == len(other.trees)
            and all(a.equals(b) for a, b in zip(self.trees, other.trees))
        )


def save_model(model: Ensemble, path):
    """JSON serialization; float values use Python repr via json, so a
    save/load round trip is bit-exact."""
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_model(path):
    return Ensemble.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _grow_tree(X, g, config, presort, kern):
    """One greedy tree on gradients ``g`` (hessians are all one).

    Returns the tree and each training row's leaf index.  Nodes are laid out
    in preorder (root, left subtree, right subtree).
    """
    n, m = X.shape
    feature, threshold, left, right, weight, cover = [], [], [], [], [], []
    leaf_of_row = np.empty(n, dtype=np.int64)

    def new_node(n_rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        weight.append(0.0)
        cover.append(n_rows)
        return len(feature) - 1

    def build(rows, depth):
        node = new_node(rows.size)
        if depth < config.max_depth and rows.size >= 2 and rows.size >= config.min_child_cover:
            mask = np.zeros(n, dtype=np.uint8)
            mask[rows] = 1
            best_gain, best_feat, best_thr = 0.0, -1, 0.0
            for f in range(m):
                gain, thr, _ = kern.split_scan(
                    presort[f], mask, X[:, f], g,
                    config.reg_lambda, config.gamma, config.min_child_cover,
                )
                if gain > best_gain:
                    best_gain, best_feat, best_thr = gain, f, thr
            if best_feat >= 0:
                go_left = X[rows, best_feat] < best_thr
                feature[node] = best_feat
                threshold[node] = best_thr
                left[node] = build(rows[go_left], depth + 1)
                right[node] = build(rows[~go_left], depth + 1)
                return node
        g_sum = float(np.sum(g[rows]))
        weight[node] = -g_sum / (rows.size + config.reg_lambda)
        leaf_of_row[rows] = node
        return node

    build(np.arange(n), 0)
    tree = RegressionTree(feature, threshold, left, right, weight, cover)
    return tree, leaf_of_row


def _rmse(y, pred):
    return float(np.sqrt(np.mean((y - pred) ** 2)))


def fit_arrays(X, y, config=None, eval_set=None, kernels=None):
    """Fit on raw arrays.  With ``eval_set=(X_val, y_val)`` also returns the
    validation RMSE after the base round and after each tree, which lets the
    tuner read every tree-count prefix off a single fit."""
    kern = kernels or _backend.active
    config = config or TrainConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, m) and y (n,) with matching n")
    n, m = X.shape
    if n == 0:
        raise ValueError("cannot fit on an empty dataset")
    if n < 2:
        raise ValueError("need at least two rows")
    if m < 1:
        raise ValueError("need at least one feature")

    presort = np.empty((m, n), dtype=np.int64)
    for f in range(m):
        presort[f] = np.argsort(X[:, f], kind="stable")

    base = float(np.mean(y))
    pred = np.full(n, base)
    curve = [_rmse(y, pred)]
    if eval_set is not None:
        X_val = np.ascontiguousarray(eval_set[0], dtype=np.float64)
        y_val = np.asarray(eval_set[1], dtype=np.float64)
        val_pred = np.full(X_val.shape[0], base)
        val_curve = [_rmse(y_val, val_pred)]

    trees = []
    for _ in range(config.n_trees):
        g = pred - y
        tree, leaf_of_row = _grow_tree(X, g, config, presort, kern)
        trees.append(tree)
        pred = pred + config.learning_rate * tree.weight[leaf_of_row]
        curve.append(_rmse(y, pred))
        if eval_set is not None:
            val_pred = val_pred + config.learning_rate * tree.leaf_values(X_val, kernels=kern)
            val_curve.append(_rmse(y_val, val_pred))

    model = Ensemble(base, config.learning_rate, trees, m, training_rmse=tuple(curve))
    if eval_set is not None:
        return model, tuple(val_curve)
    return model


def fit(data, config=None, kernels=None):
    """Fit an ensemble on a :class:`~hetboost.data.TabularDataset`."""
    return fit_arrays(data.X, data.y, config=config, kernels=kernels)


def predict(model: Ensemble, x, kernels=None):
    """Module-level alias of :meth:`Ensemble.predict`."""
    return model.predict(x, kernels=kernels)


def training_curve(model: Ensemble):
    """Per-round training RMSE recorded by :func:`fit` (index 0 is the
    base-score round)."""
    if not model.training_rmse:
        raise ValueError("model carries no training curve (was it loaded from disk?)")
    return list(model.training_rmse)
