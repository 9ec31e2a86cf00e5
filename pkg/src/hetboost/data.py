"""Grouped tabular regression data: ingestion, validation, filtering, synthesis.

A :class:`TabularDataset` is an immutable bundle of a numeric feature matrix,
a real-valued target, a group label per row, and per-column metadata.  All
operations in this module are pure functions over their inputs.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LabelError, NumericalError, ParseError, SchemaError

ROLES = ("predictor", "target", "group_label", "excluded")
CATEGORIES = (
    "travel_impedance",
    "socioeconomic_demographic",
    "built_env_landuse",
    "built_env_transit",
    "other",
)


@dataclass(frozen=True)
class FeatureMeta:
    """Role and descriptive metadata for one column."""

    name: str
    role: str
    category: str = "other"
    units: str = ""

    def __post_init__(self):
        if not self.name:
            raise SchemaError("column name must be non-empty")
        if self.role not in ROLES:
            raise SchemaError(f"unknown role {self.role!r} for column {self.name!r}")
        if self.category not in CATEGORIES:
            raise SchemaError(
                f"unknown category {self.category!r} for column {self.name!r}"
            )


@dataclass(frozen=True)
class Schema:
    """Parsed schema file: column metadata plus an optional closed label set
    for the group column."""

    columns: tuple[FeatureMeta, ...]
    group_labels: tuple[str, ...] | None = None


@dataclass(frozen=True)
class GroupSpec:
    """Distinct group labels (in order of first appearance) and their row counts."""

    labels: tuple[str, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.counts):
            raise ValueError("labels and counts must align")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("group labels must be distinct")
        if any(c < 1 for c in self.counts):
            raise ValueError("every group must be nonempty")

    @property
    def n_groups(self):
        return len(self.labels)

    @property
    def n_rows(self):
        return sum(self.counts)


class TabularDataset:
    """Immutable (X, y, groups, meta) bundle.

    ``X`` holds the predictor columns in meta order, ``y`` the target and
    ``groups`` one label per row.  ``meta`` covers every column of the
    dataset (predictors plus the target and group-label columns).
    """

    def __init__(self, X, y, groups, meta: Sequence[FeatureMeta]):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).copy()
        groups = np.asarray([str(v) for v in groups], dtype=object)
        meta = tuple(meta)

        if X.ndim != 2:
            raise SchemaError("feature matrix must be 2-D")
        n, m = X.shape
        if n < 1:
            raise SchemaError("dataset has no rows")
        if y.shape != (n,) or groups.shape != (n,):
            raise SchemaError("target/groups length must match the row count")
        names = [c.name for c in meta]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        roles = [c.role for c in meta]
        if roles.count("target") != 1:
            raise SchemaError("exactly one column must have role 'target'")
        if roles.count("group_label") != 1:
            raise SchemaError("exactly one column must have role 'group_label'")
        predictors = [c for c in meta if c.role == "predictor"]
        if len(predictors) != m:
            raise SchemaError(
                f"meta declares {len(predictors)} predictors but X has {m} columns"
            )
        if not np.isfinite(X).all():
            raise ParseError("feature matrix contains non-finite values")
        if not np.isfinite(y).all():
            raise ParseError("target contains non-finite values")
        if any(not g for g in groups):
            raise LabelError("empty group label")

        X.setflags(write=False)
        y.setflags(write=False)
        groups.setflags(write=False)
        self.X = X
        self.y = y
        self.groups = groups
        self.meta = meta

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def feature_names(self):
        return tuple(c.name for c in self.meta if c.role == "predictor")

    @property
    def predictor_meta(self):
        return tuple(c for c in self.meta if c.role == "predictor")

    @property
    def target_name(self):
        return next(c.name for c in self.meta if c.role == "target")

    @property
    def group_name(self):
        return next(c.name for c in self.meta if c.role == "group_label")

    def group_spec(self):
        labels, counts = [], []
        seen = {}
        for g in self.groups:
            if g not in seen:
                seen[g] = len(labels)
                labels.append(g)
                counts.append(0)
            counts[seen[g]] += 1
        return GroupSpec(tuple(labels), tuple(counts))

    def feature_index(self, name):
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def drop_features(self, names):
        """Dataset without the named predictor columns."""
        names = set(names)
        unknown = names - set(self.feature_names)
        if unknown:
            raise SchemaError(f"unknown features: {sorted(unknown)}")
        keep = [i for i, nm in enumerate(self.feature_names) if nm not in names]
        meta = tuple(
            c for c in self.meta if c.role != "predictor" or c.name not in names
        )
        return TabularDataset(self.X[:, keep], self.y, self.groups, meta)

    def equals(self, other):
        return (
            isinstance(other, TabularDataset)
            and self.meta == other.meta
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and list(self.groups) == list(other.groups)
        )


def load_schema(path):
    """Parse a JSON schema file.

    Grammar::

        {"columns": {"<name>": {"role": "predictor|target|group_label|excluded",
                                "category": "<category>",   # optional
                                "units": "<text>",          # optional
                                "labels": ["a", "b"]}}}     # group column only

    Column order in the file is not significant; the CSV header order rules.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict) or "columns" not in raw:
        raise SchemaError("schema file must be a JSON object with a 'columns' key")
    columns = []
    group_labels = None
    for name, entry in raw["columns"].items():
        if not isinstance(entry, dict) or "role" not in entry:
            raise SchemaError(f"schema entry for {name!r} must declare a role")
        meta = FeatureMeta(
            name=name,
            role=entry["role"],
            category=entry.get("category", "other"),
            units=entry.get("units", ""),
        )
        if "labels" in entry:
            if meta.role != "group_label":
                raise SchemaError(
                    f"'labels' is only valid on the group column (got {name!r})"
                )
            group_labels = tuple(str(v) for v in entry["labels"])
        columns.append(meta)
    return Schema(tuple(columns), group_labels)


def write_schema(schema: Schema, path):
    entries = {}
    for c in schema.columns:
        entry = {"role": c.role}
        if c.role == "predictor":
            entry["category"] = c.category
        if c.units:
            entry["units"] = c.units
        if c.role == "group_label" and schema.group_labels is not None:
            entry["labels"] = list(schema.group_labels)
        entries[c.name] = entry
    # no sort_keys: column order is meaningful and already deterministic
    Path(path).write_text(
        json.dumps({"columns": entries}, indent=2) + "\n",
        encoding="utf-8",
    )


def _parse_number(cell, row, column):
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric value {cell!r}", row=row, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {cell!r}", row=row, column=column)
    return value


def load_csv(path, schema):
    """Read a UTF-8, comma-delimited, headered CSV against ``schema``.

    ``schema`` is a :class:`Schema` or a plain sequence of
    :class:`FeatureMeta`.  The header must carry exactly the schema's column
    names; feature order follows the file header.  Row order is preserved.
    """
    if isinstance(schema, Schema):
        columns, allowed = schema.columns, schema.group_labels
    else:
        columns, allowed = tuple(schema), None
    by_name = {c.name: c for c in columns}

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        missing = [c.name for c in columns if c.name not in header]
        if missing:
            raise SchemaError(f"missing column {missing[0]!r}")
        extra = [h for h in header if h not in by_name]
        if extra:
            raise SchemaError(f"column {extra[0]!r} is not in the schema")
        if len(set(header)) != len(header):
            raise SchemaError("duplicate column in header")

        role_of = [by_name[h].role for h in header]
        feat_cols = [i for i, r in enumerate(role_of) if r == "predictor"]
        target_col = role_of.index("target") if "target" in role_of else None
        group_col = role_of.index("group_label") if "group_label" in role_of else None
        if target_col is None or group_col is None:
            # TabularDataset would reject this anyway; fail with the column name.
            raise SchemaError("schema must mark one target and one group_label column")

        xs, ys, gs = [], [], []
        for rownum, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} cells, found {len(row)}", row=rownum
                )
            xs.append(
                [_parse_number(row[i], rownum, header[i]) for i in feat_cols]
            )
            ys.append(_parse_number(row[target_col], rownum, header[target_col]))
            label = row[group_col]
            if not label:
                raise LabelError(f"empty group label (row {rownum})")
            if allowed is not None and label not in allowed:
                raise LabelError(
                    f"unknown group label {label!r} (row {rownum}); expected one of {sorted(allowed)}"
                )
            gs.append(label)

    if not ys:
        raise SchemaError(f"{path}: no data rows")
    meta = tuple(by_name[header[i]] for i in feat_cols) + (
        by_name[header[target_col]],
        by_name[header[group_col]],
    )
    X = np.asarray(xs, dtype=np.float64).reshape(len(ys), len(feat_cols))
    return TabularDataset(X, ys, gs, meta)


def write_csv(data: TabularDataset, path):
    """Write a dataset back to CSV; floats use shortest round-trip repr, so
    load_csv(write_csv(d)) reproduces ``d`` exactly."""
    names = list(data.feature_names) + [data.target_name, data.group_name]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.X[i]]
            row.append(repr(float(data.y[i])))
            row.append(data.groups[i])
            writer.writerow(row)


# ---------------------------------------------------------------------------
# multicollinearity filtering


def compute_vifs(X):
    """Variance inflation factor of each column: 1/(1 - R^2) from the
    least-squares regression of that column on the others plus an intercept.

    Numerically perfect fits (residual sum below 1e-12 of the column's
    variance) report +inf.
    """
    X = np.asarray(X, dtype=np.float64)
    n, m = X.shape
    if m < 2:
        raise ValueError("need at least two predictors to compute VIFs")
    if n <= m:
        raise NumericalError(
            f"rank deficiency: {n} rows cannot support a regression on {m} predictors"
        )
    vifs = np.empty(m)
    for j in range(m):
        xj = X[:, j]
        sst = float(((xj - xj.mean()) ** 2).sum())
        if sst == 0.0:
            raise NumericalError(f"predictor column {j} has zero variance")
        design = np.column_stack([np.ones(n), np.delete(X, j, axis=1)])
        coef, *_ = np.linalg.lstsq(design, xj, rcond=None)
        ssr = float(((xj - design @ coef) ** 2).sum())
        if ssr <= 1e-12 * sst:
            vifs[j] = np.inf
        else:
            vifs[j] = 1.0 / (ssr / sst)
    return vifs


def vif_filter(data: TabularDataset, threshold=10.0):
    """Iteratively drop the predictor with the largest VIF while it exceeds
    ``threshold``.  Returns the surviving dataset and the removal log in
    removal order as (name, vif) pairs."""
    if data.m < 2:
        raise ValueError("vif_filter needs at least two predictors")
    removed = []
    current = data
    while current.m >= 2:
        vifs = compute_vifs(current.X)
        worst = int(np.argmax(vifs))
        if not vifs[worst] > threshold:
            break
        name = current.feature_names[worst]
        removed.append((name, float(vifs[worst])))
        current = current.drop_features([name])
    return current, removed


def write_vif_log(removals, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "vif"])
        for name, vif in removals:
            writer.writerow([name, repr(float(vif))])


# ---------------------------------------------------------------------------
# trip-record aggregation


@dataclass(frozen=True)
class TripRecord:
    """One ride: zone pair, fare, distance, duration, day index."""

    origin_id: str
    destination_id: str
    fare: float
    distance: float
    duration: float
    day_index: int = 0

    def __post_init__(self):
        if self.fare < 0 or self.distance < 0 or self.duration < 0:
            raise ValueError("fare, distance and duration must be non-negative")


@dataclass(frozen=True)
class ODAggregate:
    origin_id: str
    destination_id: str
    trips_per_day: float
    fare_median: float
    fare_sd: float
    dist_median: float
    dist_sd: float
    dur_median: float
    dur_sd: float


OD_CSV_COLUMNS = (
    "origin",
    "destination",
    "trips_per_day",
    "fare_median",
    "fare_sd",
    "dist_median",
    "dist_sd",
    "dur_median",
    "dur_sd",
)


def aggregate_od(trips: Sequence[TripRecord], study_days, min_trips=51):
    """Aggregate trips per (origin, destination) pair, dropping pairs with
    fewer than ``min_trips`` trips (default keeps pairs with more than 50).

    Emits average trips per day plus the median and sample standard
    deviation (n-1 divisor) of fare, distance and duration, sorted by zone
    pair.  An even-length median is the mean of the two middle values.
    """
    if study_days < 1:
        raise ValueError("study_days must be at least 1")
    buckets: dict[tuple, list[TripRecord]] = {}
    for t in trips:
        buckets.setdefault((t.origin_id, t.destination_id), []).append(t)

    def sd(values):
        return statistics.stdev(values) if len(values) >= 2 else float("nan")

    out = []
    for (o, d) in sorted(buckets):
        rows = buckets[(o, d)]
        if len(rows) < min_trips:
            continue
        fares = [t.fare for t in rows]
        dists = [t.distance for t in rows]
        durs = [t.duration for t in rows]
        out.append(
            ODAggregate(
                origin_id=o,
                destination_id=d,
                trips_per_day=len(rows) / study_days,
                fare_median=statistics.median(fares),
                fare_sd=sd(fares),
                dist_median=statistics.median(dists),
                dist_sd=sd(dists),
                dur_median=statistics.median(durs),
                dur_sd=sd(durs),
            )
        )
    return out


def write_od_csv(rows: Sequence[ODAggregate], path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(OD_CSV_COLUMNS)
        for r in rows:
            writer.writerow(
                [r.origin_id, r.destination_id]
                + [
                    repr(float(v))
                    for v in (
                        r.trips_per_day,
                        r.fare_median,
                        r.fare_sd,
                        r.dist_median,
                        r.dist_sd,
                        r.dur_median,
                        r.dur_sd,
                    )
                ]
            )


FARE_GRAIN = 2.50
MINUTE_GRAIN = 15.0


def privacy_round(fare, minutes):
    """Snap fare to the nearest $2.50 and minutes to the nearest 15.

    Exact midpoints round up.
    """
    if fare < 0 or minutes < 0:
        raise ValueError("fare and minutes must be non-negative")

    def snap(value, grain):
        return math.floor(value / grain + 0.5) * grain

    return snap(fare, FARE_GRAIN), snap(minutes, MINUTE_GRAIN)


# ---------------------------------------------------------------------------
# synthetic data with known per-group response functions


TERM_KINDS = ("constant", "linear", "quadratic", "step")


@dataclass(frozen=True)
class ResponseTerm:
    """One additive term of a group's ground-truth response.

    kinds: constant -> value; linear -> slope * x[feature];
    quadratic -> scale * (x[feature] - center)^2;
    step -> value if x[feature] >= center else 0.
    """

    kind: str
    feature: int = 0
    value: float = 0.0
    slope: float = 0.0
    center: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ValueError(f"unknown response term kind {self.kind!r}")

    def evaluate(self, X):
        x = X[:, self.feature]
        if self.kind == "constant":
            return np.full(len(x), self.value)
        if self.kind == "linear":
            return self.slope * x
        if self.kind == "quadratic":
            return self.scale * (x - self.center) ** 2
        return np.where(x >= self.center, self.value, 0.0)


@dataclass(frozen=True)
class GroupTruth:
    """Callable ground-truth response for one group."""

    label: str
    terms: tuple[ResponseTerm, ...]

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros(X.shape[0])
        for term in self.terms:
            out += term.evaluate(X)
        return out


@dataclass(frozen=True)
class SyntheticGroup:
    label: str
    n_rows: int
    ranges: tuple[tuple[float, float], ...]
    terms: tuple[ResponseTerm, ...]


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a grouped dataset with known response functions.

    Features are drawn uniformly on each group's per-feature ranges; the
    target is that group's summed response terms plus N(0, noise_sd) noise.
    The draw order (per group: feature block, then noise vector) is fixed, so
    a seed fully determines the output.
    """

    n_features: int
    groups: tuple[SyntheticGroup, ...]
    noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if self.n_features < 1:
            raise ValueError("need at least one feature")
        if not self.groups:
            raise ValueError("need at least one group")
        labels = [g.label for g in self.groups]
        if len(set(labels)) != len(labels):
            raise ValueError("group labels must be distinct")
        for g in self.groups:
            if g.n_rows < 1:
                raise ValueError(f"group {g.label!r} must have at least one row")
            if len(g.ranges) != self.n_features:
                raise ValueError(
                    f"group {g.label!r} needs {self.n_features} feature ranges"
                )
            for lo, hi in g.ranges:
                if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                    raise ValueError(f"bad feature range ({lo}, {hi})")
            for term in g.terms:
                if not 0 <= term.feature < self.n_features:
                    raise ValueError(
                        f"term feature {term.feature} out of range for {g.label!r}"
                    )

    def to_dict(self):
        return {
            "n_features": self.n_features,
            "noise_sd": self.noise_sd,
            "seed": self.seed,
            "groups": [
                {
                    "label": g.label,
                    "n_rows": g.n_rows,
                    "ranges": [list(r) for r in g.ranges],
                    "terms": [
                        {
                            "kind": t.kind,
                            "feature": t.feature,
                            "value": t.value,
                            "slope": t.slope,
                            "center": t.center,
                            "scale": t.scale,
                        }
                        for t in g.terms
                    ],
                }
                for g in self.groups
            ],
        }

    @classmethod
    def from_dict(cls, raw):
        groups = tuple(
            SyntheticGroup(
                label=str(g["label"]),
                n_rows=int(g["n_rows"]),
                ranges=tuple((float(lo), float(hi)) for lo, hi in g["ranges"]),
                terms=tuple(
                    ResponseTerm(
                        kind=t["kind"],
                        feature=int(t.get("feature", 0)),
                        value=float(t.get("value", 0.0)),
                        slope=float(t.get("slope", 0.0)),
                        center=float(t.get("center", 0.0)),
                        scale=float(t.get("scale", 1.0)),
                    )
                    for t in g.get("terms", [])
                ),
            )
            for g in raw["groups"]
        )
        return cls(
            n_features=int(raw["n_features"]),
            groups=groups,
            noise_sd=float(raw.get("noise_sd", 0.0)),
            seed=int(raw.get("seed", 0)),
        )


def gen_synthetic(spec: SyntheticSpec):
    """Draw the dataset described by ``spec``.

    Returns the dataset and a dict mapping each group label to its callable
    ground-truth response.
    """
    rng = np.random.default_rng(spec.seed)
    m = spec.n_features
    blocks, targets, labels = [], [], []
    truths = {}
    for g in spec.groups:
        lo = np.array([r[0] for r in g.ranges])
        hi = np.array([r[1] for r in g.ranges])
        Xg = lo + rng.random((g.n_rows, m)) * (hi - lo)
        truth = GroupTruth(g.label, g.terms)
        yg = truth(Xg) + spec.noise_sd * rng.standard_normal(g.n_rows)
        blocks.append(Xg)
        targets.append(yg)
        labels.extend([g.label] * g.n_rows)
        truths[g.label] = truth
    meta = tuple(
        FeatureMeta(f"x{j + 1}", "predictor") for j in range(m)
    ) + (FeatureMeta("y", "target"), FeatureMeta("group", "group_label"))
    dataset = TabularDataset(np.vstack(blocks), np.concatenate(targets), labels, meta)
    return dataset, truths
