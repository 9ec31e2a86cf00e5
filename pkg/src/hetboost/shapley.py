"""Exact Shapley attributions for tree ensembles.

Both algorithms share one value function: the interventional expectation
v(S) = mean over a background set z of model(composite taking the explained
row's values on S and z's values elsewhere).

* :func:`shap_exact` enumerates all 2^m coalitions (guarded to m <= 15); it
  is the brute-force oracle.
* :func:`shap_tree` walks each tree's root-to-leaf paths once per background
  row.  For a fixed (x, z) pair a leaf is reached by the coalition composite
  iff every path feature in S admits x and every path feature outside S
  admits z, so the leaf's value contributes a cube-indicator game whose
  Shapley weights have the closed form used here.  The result equals
  shap_exact wherever the guard permits enumeration.

Aggregation turns a per-row attribution matrix into mean-absolute impacts
per feature and normalized percentage shares, per group and per feature
category.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .boosting import Ensemble
from .data import CATEGORIES
from .errors import NumericalError

MAX_EXACT_FEATURES = 15


@dataclass(frozen=True)
class ShapRow:
    """Attribution offset plus one value per feature; base + phi.sum() equals
    the model prediction."""

    base: float
    phi: np.ndarray


def _check_point(x, m):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m,):
        raise ValueError(f"expected a length-{m} feature vector, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("feature values must be finite")
    return x


def _check_background(background, m):
    Z = np.ascontiguousarray(background, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[None, :]
    if Z.size == 0:
        raise ValueError("background set must be nonempty")
    if Z.ndim != 2 or Z.shape[1] != m:
        raise ValueError(f"background must be (k, {m}), got shape {Z.shape}")
    if not np.isfinite(Z).all():
        raise ValueError("background values must be finite")
    return Z


def default_background(X, max_rows=256, seed=0):
    """Deterministic background subsample: a seeded permutation prefix of the
    rows (all rows when n <= max_rows)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] <= max_rows:
        return X.copy()
    idx = np.random.default_rng(seed).permutation(X.shape[0])[:max_rows]
    return X[idx]


def shap_exact(model: Ensemble, x, background, kernels=None):
    """Brute-force Shapley values by full coalition enumeration.

    Guarded to m <= 15 features; coalition sums run in binary-mask order.
    """
    m = model.n_features
    if m > MAX_EXACT_FEATURES:
        raise ValueError(
            f"shap_exact enumerates 2^m coalitions and is limited to "
            f"m <= {MAX_EXACT_FEATURES} (got {m}); use shap_tree instead"
        )
    x = _check_point(x, m)
    Z = _check_background(background, m)
    n_masks = 1 << m
    bits = (np.arange(n_masks, dtype=np.uint32)[:, None] >> np.arange(m)) & 1
    bits = bits.astype(bool)

    v = np.empty(n_masks)
    chunk = max(1, (1 << 22) // max(1, Z.shape[0] * m))
    for start in range(0, n_masks, chunk):
        stop = min(start + chunk, n_masks)
        take_x = bits[start:stop][:, None, :]
        composite = np.where(take_x, x[None, None, :], Z[None, :, :])
        preds = model.predict(composite.reshape(-1, m), kernels=kernels)
        v[start:stop] = preds.reshape(stop - start, Z.shape[0]).mean(axis=1)

    fact = [math.factorial(i) for i in range(m + 1)]
    weight_by_size = np.array(
        [fact[s] * fact[m - 1 - s] / fact[m] for s in range(m)]
    )
    sizes = bits.sum(axis=1)

    phi = np.empty(m)
    for j in range(m):
        without = np.nonzero(~bits[:, j])[0]
        with_j = without + (1 << j)
        phi[j] = float(
            np.add.reduce(weight_by_size[sizes[without]] * (v[with_j] - v[without]))
        )
    return ShapRow(base=float(v[0]), phi=phi)


def _leaf_paths(tree):
    """Flatten a tree into leaf paths: per leaf its weight and, per feature
    constrained on its root path, the half-open interval [lo, hi) a routed
    value must fall in.  Leaves whose combined interval is empty are
    unreachable for every input and are dropped."""
    leaf_w, offsets, feats, los, his = [], [0], [], [], []

    def walk(node, bounds):
        f = int(tree.feature[node])
        if f < 0:
            leaf_w.append(float(tree.weight[node]))
            for bf, (lo, hi) in bounds.items():
                feats.append(bf)
                los.append(lo)
                his.append(hi)
            offsets.append(len(feats))
            return
        t = float(tree.threshold[node])
        lo, hi = bounds.get(f, (-np.inf, np.inf))
        if lo < min(hi, t):
            walk(int(tree.left[node]), {**bounds, f: (lo, min(hi, t))})
        if max(lo, t) < hi:
            walk(int(tree.right[node]), {**bounds, f: (max(lo, t), hi)})

    walk(0, {})
    return (
        np.asarray(leaf_w, dtype=np.float64),
        np.asarray(offsets, dtype=np.int32),
        np.asarray(feats, dtype=np.int32),
        np.asarray(los, dtype=np.float64),
        np.asarray(his, dtype=np.float64),
    )


def _coalition_coefs(max_path):
    """Shapley weights of a cube-indicator game with ``a`` features admitting
    only x and ``b`` admitting only z: a member of the x-side gets
    (a-1)! b! / (a+b)! and a member of the z-side gets -(a! (b-1)! / (a+b)!).
    """
    size = max_path + 1
    keep = np.zeros((size, size))
    drop = np.zeros((size, size))
    fact = [math.factorial(i) for i in range(2 * size)]
    for a in range(size):
        for b in range(size):
            if a >= 1:
                keep[a, b] = fact[a - 1] * fact[b] / fact[a + b]
            if b >= 1:
                drop[a, b] = -(fact[a] * fact[b - 1] / fact[a + b])
    return keep, drop


def shap_tree_matrix(model: Ensemble, X, background, kernels=None):
    """Interventional tree-path Shapley values for every row of ``X``.

    Returns (base, phi) with phi of shape (n, m); base is v(empty set), the
    mean background prediction, shared by all rows.
    """
    kern = kernels or _backend.active
    m = model.n_features
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m:
        raise ValueError(f"expected (n, {m}) matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("feature values must be finite")
    Z = _check_background(background, m)

    paths = [_leaf_paths(tree) for tree in model.trees]
    max_path = max(
        (int(np.diff(off).max()) for _, off, *_ in paths if off.size > 1),
        default=0,
    )
    coef_keep, coef_drop = _coalition_coefs(max_path)

    phi = np.zeros((X.shape[0], m))
    for leaf_w, off, feats, lo, hi in paths:
        kern.shap_accumulate(leaf_w, off, feats, lo, hi, X, Z, coef_keep, coef_drop, phi)
    phi *= model.learning_rate / Z.shape[0]

    base = float(np.mean(model.predict(Z, kernels=kern)))
    return base, phi


def shap_tree(model: Ensemble, x, background, kernels=None):
    """Single-row convenience wrapper over :func:`shap_tree_matrix`."""
    x = _check_point(x, model.n_features)
    base, phi = shap_tree_matrix(model, x[None, :], background, kernels=kernels)
    return ShapRow(base=base, phi=phi[0])


# ---------------------------------------------------------------------------
# importance aggregation


@dataclass(frozen=True)
class ScopeImportance:
    scope: str
    n_rows: int
    mean_abs: np.ndarray  # mean |phi| per feature
    share: np.ndarray     # percentages, summing to 100 per scope


@dataclass(frozen=True)
class CategoryImportance:
    category: str
    n_features: int
    share_sum: float
    share_avg: float


@dataclass(frozen=True)
class ImportanceReport:
    feature_names: tuple[str, ...]
    scopes: tuple[ScopeImportance, ...]  # "global" first, then group labels
    categories: dict[str, tuple[CategoryImportance, ...]]

    def scope(self, name):
        for s in self.scopes:
            if s.scope == name:
                return s
        raise KeyError(name)

    def to_dict(self):
        return {
            "features": list(self.feature_names),
            "scopes": [
                {
                    "scope": s.scope,
                    "n_rows": s.n_rows,
                    "mean_abs": [float(v) for v in s.mean_abs],
                    "share_pct": [float(v) for v in s.share],
                }
                for s in self.scopes
            ],
            "categories": {
                scope: [
                    {
                        "category": c.category,
                        "n_features": c.n_features,
                        "share_sum": c.share_sum,
                        "share_avg": c.share_avg,
                    }
                    for c in rows
                ]
                for scope, rows in self.categories.items()
            },
        }


def importance(phi, groups, meta):
    """Aggregate an (n, m) attribution matrix into per-scope importances.

    ``groups`` is a length-n label vector; ``meta`` the predictor
    FeatureMeta list aligned with phi's columns.  Per scope the mean
    absolute attribution P_j is normalized to percentage shares I_j
    (sum 100); categories aggregate shares over their member features.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2:
        raise ValueError("phi must be 2-D")
    n, m = phi.shape
    groups = np.asarray([str(g) for g in groups], dtype=object)
    if groups.shape != (n,):
        raise ValueError("groups length must match phi rows")
    meta = tuple(meta)
    if len(meta) != m:
        raise ValueError("meta length must match phi columns")
    names = tuple(c.name for c in meta)

    labels = []
    for g in groups:
        if g not in labels:
            labels.append(g)

    abs_phi = np.abs(phi)
    scopes = []
    categories = {}
    for scope_name, rows in [("global", np.arange(n))] + [
        (lab, np.nonzero(groups == lab)[0]) for lab in labels
    ]:
        mean_abs = abs_phi[rows].mean(axis=0)
        total = float(mean_abs.sum())
        if total == 0.0:
            raise NumericalError(
                f"all attributions vanish in scope {scope_name!r}; cannot normalize"
            )
        share = 100.0 * mean_abs / total
        scopes.append(
            ScopeImportance(scope_name, int(rows.size), mean_abs, share)
        )
        cat_rows = []
        for cat in CATEGORIES:
            members = [j for j, c in enumerate(meta) if c.category == cat]
            if not members:
                continue
            share_sum = float(share[members].sum())
            cat_rows.append(
                CategoryImportance(cat, len(members), share_sum, share_sum / len(members))
            )
        categories[scope_name] = tuple(cat_rows)

    return ImportanceReport(names, tuple(scopes), categories)


# ---------------------------------------------------------------------------
# exports


def write_shap_csv(base, phi, groups, feature_names, path):
    """One row per instance: base, phi per feature, group label."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["base"] + [f"phi_{n}" for n in feature_names] + ["group"])
        for i in range(phi.shape[0]):
            writer.writerow(
                [repr(float(base))]
                + [repr(float(v)) for v in phi[i]]
                + [groups[i]]
            )


def write_importance_csv(report: ImportanceReport, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scope", "n_rows", "feature", "mean_abs_shap", "share_pct"])
        for s in report.scopes:
            for j, name in enumerate(report.feature_names):
                writer.writerow(
                    [s.scope, s.n_rows, name,
                     repr(float(s.mean_abs[j])), repr(float(s.share[j]))]
                )


def write_category_csv(report: ImportanceReport, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scope", "category", "n_features", "share_sum", "share_avg"])
        for scope, rows in report.categories.items():
            for c in rows:
                writer.writerow(
                    [scope, c.category, c.n_features,
                     repr(float(c.share_sum)), repr(float(c.share_avg))]
                )


def write_importance_json(report: ImportanceReport, path):
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
