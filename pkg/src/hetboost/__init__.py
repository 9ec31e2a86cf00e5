"""hetboost: boosted regression trees for grouped tabular data, explained
with exact Shapley attributions and conditional dependence curves."""

__version__ = "0.1.0"

from . import _backend
from .boosting import (
    Ensemble,
    RegressionTree,
    TrainConfig,
    fit,
    fit_arrays,
    load_model,
    predict,
    save_model,
    training_curve,
)
from .data import (
    FeatureMeta,
    GroupSpec,
    ODAggregate,
    ResponseTerm,
    Schema,
    SyntheticGroup,
    SyntheticSpec,
    TabularDataset,
    TripRecord,
    aggregate_od,
    gen_synthetic,
    load_csv,
    load_schema,
    privacy_round,
    vif_filter,
    write_csv,
)
from .dependence import (
    CurveSet,
    Grid,
    build_curve_set,
    cpdp,
    ice,
    make_grid,
    pdp,
    rug,
)
from .shapley import (
    ImportanceReport,
    ShapRow,
    default_background,
    importance,
    shap_exact,
    shap_tree,
    shap_tree_matrix,
)
from .tuning import CvResult, TuningGrid, default_grid, grid_search, kfold_split


def backend_name():
    """Name of the active kernel backend ('compiled' or 'python')."""
    return _backend.active.BACKEND_NAME
