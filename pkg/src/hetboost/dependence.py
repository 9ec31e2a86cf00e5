"""The partial-dependence family: sweep one feature over a grid and average
model predictions globally (PDP), per instance (ICE), per group (CPDP), and
per instance within a group (CIPDP, the group's ICE rows).

All curves share one evaluation path: an (n, T) ICE matrix whose column
means are the PDP and whose group-restricted column means are the CPDPs, so
the averaging identities hold exactly.  Decile rug marks and per-grid-point
support counts accompany the curves so downstream consumers can flag
thinly supported regions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

GRID_STRATEGIES = ("quantile", "uniform")
DEFAULT_GRID_POINTS = 50
DECILES = np.arange(0.1, 1.0, 0.1)
LOW_SUPPORT_FRACTION = 0.01


@dataclass(frozen=True)
class Grid:
    """Strictly increasing evaluation points for one feature."""

    feature: int
    points: np.ndarray
    strategy: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if self.strategy not in GRID_STRATEGIES:
            raise ValueError(f"unknown grid strategy {self.strategy!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


def _feature_index(data, feature):
    return feature if isinstance(feature, int) else data.feature_index(feature)


def make_grid(data, feature, strategy="quantile", count=DEFAULT_GRID_POINTS):
    """Build a grid over the observed range of ``feature``.

    quantile: empirical quantiles at equally spaced probabilities,
    deduplicated; uniform: equally spaced over [min, max].
    """
    if count < 2:
        raise ValueError("grid count must be at least 2")
    idx = _feature_index(data, feature)
    col = data.X[:, idx]
    if col.min() == col.max():
        raise NumericalError(
            f"feature {data.feature_names[idx]!r} is constant; no grid possible"
        )
    if strategy == "uniform":
        points = np.linspace(col.min(), col.max(), count)
    elif strategy == "quantile":
        points = np.unique(np.quantile(col, np.linspace(0.0, 1.0, count)))
    else:
        raise ValueError(f"unknown grid strategy {strategy!r}")
    return Grid(feature=idx, points=points, strategy=strategy)


def ice_matrix(model, X, feature, points, kernels=None):
    """Entry (i, t): prediction for row i with ``feature`` overwritten by
    ``points[t]`` and every other column untouched."""
    X = np.asarray(X, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    out = np.empty((X.shape[0], points.size))
    sweep = X.copy()
    for t, value in enumerate(points):
        sweep[:, feature] = value
        out[:, t] = model.predict(sweep, kernels=kernels)
    return out


def ice(model, data, grid: Grid, kernels=None):
    return ice_matrix(model, data.X, grid.feature, grid.points, kernels=kernels)


def pdp(ice_values):
    """Column means of an ICE matrix."""
    ice_values = np.asarray(ice_values, dtype=np.float64)
    if ice_values.ndim != 2 or ice_values.size == 0:
        raise ValueError("need a nonempty (n, T) ICE matrix")
    return ice_values.mean(axis=0)


def cpdp(ice_values, groups, labels=None):
    """Per-group column means of the ICE matrix (each group's rows are its
    CIPDP curves).

    Returns (dict label -> (curve, n_g), warnings); requested labels with no
    rows are skipped with a warning record instead of an error.
    """
    ice_values = np.asarray(ice_values, dtype=np.float64)
    groups = np.asarray([str(g) for g in groups], dtype=object)
    if groups.shape[0] != ice_values.shape[0]:
        raise ValueError("groups length must match ICE rows")
    if labels is None:
        labels = []
        for g in groups:
            if g not in labels:
                labels.append(g)
    curves = {}
    warnings = []
    for label in labels:
        rows = np.nonzero(groups == label)[0]
        if rows.size == 0:
            warnings.append(f"group {label!r} has no rows; skipped")
            continue
        curves[label] = (ice_values[rows].mean(axis=0), int(rows.size))
    return curves, warnings


@dataclass(frozen=True)
class RugMarks:
    """Empirical deciles (10%..90%) of a feature, globally and per group."""

    feature: int
    global_deciles: np.ndarray
    per_group: dict[str, np.ndarray]


def rug(data, feature):
    idx = _feature_index(data, feature)
    col = data.X[:, idx]
    if col.min() == col.max():
        raise NumericalError("rug marks need a non-constant feature")
    per_group = {}
    for label in data.group_spec().labels:
        per_group[label] = np.quantile(col[data.groups == label], DECILES)
    return RugMarks(idx, np.quantile(col, DECILES), per_group)


def grid_support(data, grid: Grid, low_support_fraction=LOW_SUPPORT_FRACTION):
    """Rows falling in each grid point's nearest-grid-cell, per scope.

    Returns dict scope -> (counts, low_support flags); a point is flagged
    when its cell holds fewer than ``low_support_fraction`` of the scope's
    rows.
    """
    col = data.X[:, grid.feature]
    edges = 0.5 * (grid.points[:-1] + grid.points[1:])
    scopes = {"global": np.ones(data.n, dtype=bool)}
    for label in data.group_spec().labels:
        scopes[label] = data.groups == label
    out = {}
    for scope, mask in scopes.items():
        cells = np.searchsorted(edges, col[mask])
        counts = np.bincount(cells, minlength=grid.points.size)
        flags = counts < low_support_fraction * mask.sum()
        out[scope] = (counts, flags)
    return out


@dataclass(frozen=True)
class CurveSet:
    """Grid, global PDP, per-group CPDPs and supporting diagnostics for one
    feature; optionally the full ICE matrix with its row-to-group mapping."""

    feature_name: str
    grid: Grid
    global_pdp: np.ndarray
    per_group: dict[str, tuple[np.ndarray, int]]
    rug: RugMarks
    support: dict[str, tuple[np.ndarray, np.ndarray]]
    ice: np.ndarray | None = None
    ice_groups: np.ndarray | None = None


def build_curve_set(model, data, grid: Grid, include_ice=False, kernels=None):
    matrix = ice(model, data, grid, kernels=kernels)
    curves, _ = cpdp(matrix, data.groups, labels=list(data.group_spec().labels))
    return CurveSet(
        feature_name=data.feature_names[grid.feature],
        grid=grid,
        global_pdp=pdp(matrix),
        per_group=curves,
        rug=rug(data, grid.feature),
        support=grid_support(data, grid),
        ice=matrix if include_ice else None,
        ice_groups=data.groups if include_ice else None,
    )


def write_curves_csv(curve_sets, path):
    """Long-format export: feature, grid_value, scope, estimate, n_scope,
    low_support."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["feature", "grid_value", "scope", "estimate", "n_scope", "low_support"]
        )
        for cs in curve_sets:
            n = int(sum(ng for _, ng in cs.per_group.values()))
            rows = [("global", cs.global_pdp, n)] + [
                (label, curve, ng) for label, (curve, ng) in cs.per_group.items()
            ]
            for scope, curve, n_scope in rows:
                flags = cs.support[scope][1]
                for t, value in enumerate(cs.grid.points):
                    writer.writerow(
                        [cs.feature_name, repr(float(value)), scope,
                         repr(float(curve[t])), n_scope, int(flags[t])]
                    )


def write_rug_csv(curve_sets, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "scope", "decile", "value"])
        for cs in curve_sets:
            rows = [("global", cs.rug.global_deciles)] + list(cs.rug.per_group.items())
            for scope, deciles in rows:
                for p, value in zip(DECILES, deciles):
                    writer.writerow(
                        [cs.feature_name, scope, repr(round(float(p), 1)),
                         repr(float(value))]
                    )
