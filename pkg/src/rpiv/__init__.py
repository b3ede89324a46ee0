"""Residual prediction specification test for linear instrumental-variable
models: 2SLS estimation, machine-learned weight functions, robust variance
estimators, the Sargan-Hansen baseline, and a Monte-Carlo harness."""

import warnings as _warnings

# numba probes TBB at import and complains on older system TBBs before
# falling back to another threading layer; pure noise for this package
_warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB")

__version__ = "0.1.0"

from .dataset import (
    AugmentedDataset,
    ColumnRoles,
    Dataset,
    SplitPlan,
    augment,
    auxiliary_size,
    load_csv,
    make_split,
    save_csv,
)
from .exceptions import DataError, EstimationError
from .forest import RegressionForest, fit_forest
from .jtest import JTestOutcome, sargan, square_instrument
from .rptest import (
    AggregateOutcome,
    ResidualPredictionTest,
    TestOutcome,
    correction_vector,
    numerator,
    run_aggregated,
    run_test,
    sigma_cluster,
    sigma_het,
    sigma_hom,
)
from .simulate import (
    MethodRate,
    RejectionReport,
    SimSpec,
    generate,
    power_curve,
    rejection_experiment,
    report_rows,
)
from .twostage import TwoSlsFit, fit_ols, fit_tsls
from .weights import Regressor, WeightFunction, learn_weight

__all__ = [
    "AggregateOutcome",
    "AugmentedDataset",
    "ColumnRoles",
    "DataError",
    "Dataset",
    "EstimationError",
    "JTestOutcome",
    "MethodRate",
    "RegressionForest",
    "Regressor",
    "RejectionReport",
    "ResidualPredictionTest",
    "SimSpec",
    "SplitPlan",
    "TestOutcome",
    "TwoSlsFit",
    "WeightFunction",
    "augment",
    "auxiliary_size",
    "correction_vector",
    "fit_forest",
    "fit_ols",
    "fit_tsls",
    "generate",
    "learn_weight",
    "load_csv",
    "make_split",
    "numerator",
    "power_curve",
    "rejection_experiment",
    "report_rows",
    "run_aggregated",
    "run_test",
    "sargan",
    "save_csv",
    "sigma_cluster",
    "sigma_het",
    "sigma_hom",
    "square_instrument",
]
