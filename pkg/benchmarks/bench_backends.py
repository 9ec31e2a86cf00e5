"""Compare the compiled kernels against the numpy fallback.

Times fit / predict / tree-SHAP on synthetic data for every available
backend and checks that the outputs are bit-identical.

    python benchmarks/bench_backends.py [--rows 8000] [--features 8]
        [--trees 100] [--repeat 3]
"""

import argparse
import time

import numpy as np

from hetboost import _backend
from hetboost.boosting import TrainConfig, fit_arrays
from hetboost.shapley import shap_tree_matrix


def timed(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=8000)
    parser.add_argument("--features", type=int, default=8)
    parser.add_argument("--trees", type=int, default=100)
    parser.add_argument("--depth", type=int, default=5)
    parser.add_argument("--explain-rows", type=int, default=1000)
    parser.add_argument("--background", type=int, default=32)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    X = rng.normal(size=(args.rows, args.features))
    y = (
        rng.normal(size=args.rows)
        + np.sin(X[:, 0] * 2.0) * 3.0
        + (X[:, 1] > 0.5) * 2.0
        + X[:, 2] ** 2
    )
    cfg = TrainConfig(n_trees=args.trees, learning_rate=0.1, max_depth=args.depth)
    X_pred = rng.normal(size=(args.rows * 5, args.features))
    X_explain = X[: args.explain_rows]
    Z = X[-args.background:]

    backends = _backend.available()
    print(f"backends: {', '.join(backends)}")
    print(
        f"fit: {args.rows} rows x {args.features} features, {args.trees} trees, "
        f"depth {args.depth}; predict: {X_pred.shape[0]} rows; "
        f"shap: {args.explain_rows} rows x {args.background} background"
    )

    times = {}
    outputs = {}
    for name in backends:
        kern = _backend.get(name)
        t_fit, model = timed(lambda: fit_arrays(X, y, cfg, kernels=kern), args.repeat)
        t_pred, preds = timed(lambda: model.predict(X_pred, kernels=kern), args.repeat)
        t_shap, shap = timed(
            lambda: shap_tree_matrix(model, X_explain, Z, kernels=kern), args.repeat
        )
        times[name] = {"fit": t_fit, "predict": t_pred, "shap": t_shap}
        outputs[name] = (model, preds, shap)

    header = f"{'task':<10}" + "".join(f"{n:>14}" for n in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print()
    print(header)
    for task in ("fit", "predict", "shap"):
        row = f"{task:<10}" + "".join(f"{times[n][task]:>13.3f}s" for n in backends)
        if len(backends) > 1:
            row += f"{times['python'][task] / times['compiled'][task]:>9.1f}x"
        print(row)

    if len(backends) > 1:
        m_py, p_py, s_py = outputs["python"]
        m_cy, p_cy, s_cy = outputs["compiled"]
        identical = (
            m_py.equals(m_cy)
            and np.array_equal(p_py, p_cy)
            and s_py[0] == s_cy[0]
            and np.array_equal(s_py[1], s_cy[1])
        )
        print(f"\noutputs bit-identical across backends: {identical}")
        if not identical:
            raise SystemExit(1)


if __name__ == "__main__":
    main()
