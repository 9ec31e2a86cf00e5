"""Batch command-line front end.

Subcommands:

* ``synth``    — draw a synthetic grouped dataset with known per-group
  response functions, writing the data CSV, a ground-truth sidecar, and a
  matching schema.
* ``pipeline`` — load, filter, optionally tune, fit, explain, and export all
  artifacts plus a manifest with content hashes.
* ``report``   — verify a pipeline run's manifest and render the importance
  tables.

Everything is deterministic: one root seed is mapped to per-stage seeds via
sha256(root:stage), and a rerun with the same inputs reproduces every output
byte.  Exit codes: 0 success, 2 usage, 3 data validation, 4 numerical
failure, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import shutil
import sys
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .boosting import TrainConfig, fit, save_model
from .data import (
    SyntheticSpec,
    Schema,
    FeatureMeta,
    gen_synthetic,
    load_csv,
    load_schema,
    vif_filter,
    write_csv,
    write_schema,
    write_vif_log,
)
from .dependence import build_curve_set, make_grid, write_curves_csv, write_rug_csv
from .errors import (
    HetboostError,
    IntegrityError,
    NumericalError,
    TuningError,
    ValidationError,
)
from .shapley import (
    default_background,
    importance,
    shap_exact,
    shap_tree_matrix,
    write_category_csv,
    write_importance_csv,
    write_importance_json,
    write_shap_csv,
)
from .tuning import TuningGrid, default_grid, grid_search, write_cv_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

MANIFEST_NAME = "manifest.json"


def derive_seed(root_seed, stage):
    """Per-stage seed: the low 32 bits of sha256('<root>:<stage>')."""
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args):
    spec = SyntheticSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
    if args.seed is not None:
        spec = SyntheticSpec(
            n_features=spec.n_features,
            groups=spec.groups,
            noise_sd=spec.noise_sd,
            seed=derive_seed(args.seed, "synth"),
        )
    dataset, truths = gen_synthetic(spec)
    out = Path(args.out)
    write_csv(dataset, out)

    truth_path = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    truth_path.write_text(
        json.dumps({"spec": spec.to_dict()}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    schema_path = Path(args.schema_out) if args.schema_out else out.with_suffix(".schema.json")
    write_schema(Schema(dataset.meta), schema_path)
    print(f"wrote {out}, {truth_path}, {schema_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pipeline


def _parse_grid_arg(text):
    strategy, _, count = text.partition(":")
    if strategy not in ("quantile", "uniform"):
        raise ValidationError(f"--grid strategy must be quantile or uniform, got {strategy!r}")
    try:
        n = int(count) if count else 50
    except ValueError:
        raise ValidationError(f"bad --grid point count {count!r}") from None
    return strategy, n


def _apply_group_override(schema: Schema, column):
    """Re-role ``column`` as the group label; a previously marked group
    column becomes excluded."""
    names = [c.name for c in schema.columns]
    if column not in names:
        raise ValidationError(f"--groups column {column!r} is not in the schema")
    columns = []
    for c in schema.columns:
        if c.name == column:
            columns.append(FeatureMeta(c.name, "group_label", c.category, c.units))
        elif c.role == "group_label":
            columns.append(FeatureMeta(c.name, "excluded", c.category, c.units))
        else:
            columns.append(c)
    return Schema(tuple(columns), schema.group_labels)


def _stage(name):
    print(f"[{name}]", flush=True)


def cmd_pipeline(args):
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise ValidationError(f"output directory {out} exists and is not empty")
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _run_pipeline(args, out)
    except BaseException:
        # never leave partial artifacts behind
        if created:
            shutil.rmtree(out, ignore_errors=True)
        else:
            for child in out.iterdir():
                child.unlink()
        raise


def _run_pipeline(args, out):
    artifacts = {}

    def emit(name, writer):
        path = out / name
        writer(path)
        artifacts[name] = _sha256(path)

    _stage("load")
    schema = load_schema(args.schema)
    if args.groups:
        schema = _apply_group_override(schema, args.groups)
    data = load_csv(args.input, schema)

    _stage("vif")
    if data.m >= 2:
        data, removals = vif_filter(data, threshold=args.vif_threshold)
    else:
        removals = []
    emit("vif_removals.csv", lambda p: write_vif_log(removals, p))

    config = TrainConfig(
        n_trees=args.trees,
        learning_rate=args.lr,
        max_depth=args.depth,
        seed=derive_seed(args.seed, "fit"),
    )
    if args.tune:
        _stage("tune")
        if bool(args.tune_trees) != bool(args.tune_rates):
            raise ValidationError("--tune-trees and --tune-rates must be given together")
        if args.tune_trees:
            grid = TuningGrid(
                tree_counts=tuple(args.tune_trees),
                learning_rates=tuple(args.tune_rates),
                base=config,
            )
        else:
            grid = default_grid(config)
        config, cv_results = grid_search(
            data, grid, k=args.folds, seed=derive_seed(args.seed, "folds")
        )
        emit("cv_results.csv", lambda p: write_cv_csv(cv_results, config, p))

    _stage("fit")
    model = fit(data, config)
    emit("model.json", lambda p: save_model(model, p))

    _stage("shap")
    background = default_background(
        data.X, max_rows=args.background, seed=derive_seed(args.seed, "background")
    )
    if args.shap == "exact":
        rows = [shap_exact(model, data.X[i], background) for i in range(data.n)]
        base = rows[0].base
        phi = np.vstack([r.phi for r in rows])
    else:
        base, phi = shap_tree_matrix(model, data.X, background)
    emit(
        "shap_values.csv",
        lambda p: write_shap_csv(base, phi, data.groups, data.feature_names, p),
    )

    _stage("importance")
    report = importance(phi, data.groups, data.predictor_meta)
    emit("importance.csv", lambda p: write_importance_csv(report, p))
    emit("categories.csv", lambda p: write_category_csv(report, p))
    emit("importance.json", lambda p: write_importance_json(report, p))

    _stage("curves")
    strategy, count = _parse_grid_arg(args.grid)
    if args.pdp_features:
        wanted = [w.strip() for w in args.pdp_features.split(",") if w.strip()]
    else:
        order = np.argsort(-report.scope("global").share, kind="stable")
        wanted = [report.feature_names[j] for j in order[:5]]
    curve_sets = [
        build_curve_set(model, data, make_grid(data, name, strategy, count))
        for name in wanted
    ]
    emit("curves.csv", lambda p: write_curves_csv(curve_sets, p))
    emit("rug.csv", lambda p: write_rug_csv(curve_sets, p))

    _stage("manifest")
    manifest = {
        "tool": {"name": "hetboost", "version": __version__},
        "config": {
            "input": str(args.input),
            "schema": str(args.schema),
            "seed": args.seed,
            "groups": args.groups,
            "tune": args.tune,
            "folds": args.folds,
            "vif_threshold": args.vif_threshold,
            "train": config.to_dict(),
            "shap": args.shap,
            "background": args.background,
            "grid": args.grid,
            "pdp_features": wanted,
        },
        "artifacts": artifacts,
    }
    (out / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(artifacts) + 1} artifacts to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def verify_manifest(artifacts_dir):
    artifacts_dir = Path(artifacts_dir)
    manifest_path = artifacts_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise IntegrityError(f"no {MANIFEST_NAME} in {artifacts_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    for name, expected in sorted(manifest.get("artifacts", {}).items()):
        path = artifacts_dir / name
        if not path.exists():
            raise IntegrityError(f"artifact {name} is missing")
        actual = _sha256(path)
        if actual != expected:
            raise IntegrityError(f"artifact {name} does not match its manifest hash")
    return manifest


def category_average(share_sum, n_features):
    """Average importance of a category; the value the renderer prints."""
    if n_features < 1:
        raise ValueError("category must have at least one feature")
    return share_sum / n_features


def _fmt2(value):
    """Two-decimal display with half-up rounding on the decimal string, so
    e.g. 9.485 prints as 9.49 despite its binary representation."""
    return str(Decimal(str(float(value))).quantize(Decimal("0.01"), ROUND_HALF_UP))


def render_category_table(rows):
    """Render (scope, category, n_features, share_sum) rows, verifying the
    stored average (when given) against sum/count before printing."""
    lines = [
        f"{'scope':<14} {'category':<28} {'count':>5} {'share_sum':>10} {'share_avg':>10}"
    ]
    for row in rows:
        scope, category, count, share_sum = row[:4]
        avg = category_average(share_sum, count)
        if len(row) > 4 and abs(avg - row[4]) > 1e-9:
            raise NumericalError(
                f"category {category!r} in scope {scope!r}: stored average "
                f"{row[4]} != {share_sum}/{count}"
            )
        lines.append(
            f"{scope:<14} {category:<28} {count:>5d} "
            f"{_fmt2(share_sum):>10} {_fmt2(avg):>10}"
        )
    return "\n".join(lines)


def render_importance_tables(importance_rows, top_k):
    """Per-scope top-k table from (scope, n_rows, feature, share) rows."""
    scopes = {}
    for scope, n_rows, feat, share in importance_rows:
        scopes.setdefault(scope, (n_rows, []))[1].append((feat, share))
    lines = []
    for scope, (n_rows, feats) in scopes.items():
        lines.append(f"-- {scope} (n={n_rows}) --")
        ranked = sorted(feats, key=lambda fs: (-fs[1], fs[0]))
        for feat, share in ranked[:top_k]:
            lines.append(f"  {feat:<28} {share:>7.2f}%")
    return "\n".join(lines)


def cmd_report(args):
    artifacts_dir = Path(args.artifacts)
    verify_manifest(artifacts_dir)

    with open(artifacts_dir / "importance.csv", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        imp_rows = [
            (r["scope"], int(r["n_rows"]), r["feature"], float(r["share_pct"]))
            for r in reader
        ]
    with open(artifacts_dir / "categories.csv", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cat_rows = [
            (r["scope"], r["category"], int(r["n_features"]),
             float(r["share_sum"]), float(r["share_avg"]))
            for r in reader
        ]

    print(render_importance_tables(imp_rows, args.top))
    print()
    print(render_category_table(cat_rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing / dispatch


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hetboost",
        description="Boosted-tree regression with Shapley attributions and "
        "group-conditional dependence curves",
    )
    parser.add_argument(
        "--backend",
        choices=("compiled", "python"),
        help="force a kernel backend (default: compiled when built)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic grouped dataset")
    p.add_argument("--spec", required=True, help="JSON synthetic-spec file")
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.add_argument("--truth", help="ground-truth sidecar path (default: <out>.truth.json)")
    p.add_argument("--schema-out", help="schema path (default: <out>.schema.json)")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="run the full analysis pipeline")
    p.add_argument("--input", required=True, help="input dataset CSV")
    p.add_argument("--schema", required=True, help="schema JSON for the input")
    p.add_argument("--out", required=True, help="artifacts directory (must be empty)")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--groups", help="use this column as the group label")
    p.add_argument("--vif-threshold", type=float, default=10.0)
    p.add_argument("--tune", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--tune-trees", type=int, nargs="*", help="tree counts to search")
    p.add_argument("--tune-rates", type=float, nargs="*", help="learning rates to search")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--shap", choices=("exact", "tree"), default="tree")
    p.add_argument("--background", type=int, default=256,
                   help="max background rows for attribution")
    p.add_argument("--pdp-features", help="comma-separated feature list "
                   "(default: top 5 by global importance)")
    p.add_argument("--grid", default="quantile:50",
                   help="grid spec strategy:count (default quantile:50)")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("report", help="render tables from pipeline artifacts")
    p.add_argument("--artifacts", required=True, help="pipeline output directory")
    p.add_argument("--top", type=int, default=10, help="features per scope table")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend:
        try:
            _backend.select(args.backend)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TuningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cause = exc.__cause__
        return EXIT_NUMERICAL if isinstance(cause, NumericalError) else EXIT_VALIDATION
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HetboostError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
