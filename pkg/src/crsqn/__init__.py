"""Cyclic regularized stochastic quasi-Newton optimization toolkit.

Solves convex (not necessarily strongly convex) finite-sum problems with a
stochastic BFGS iteration whose gradient and curvature-matrix regularizers
decay along validated power-law schedules, plus RES and SA baselines, a
benchmark harness, and an sklearn-style classifier front end.
"""

from .data import (
    Dataset,
    StandardizationStats,
    load_csv,
    standardize,
    synthetic_classification_dataset,
)
from .estimator import CRSQNClassifier
from .hessian import CyclicBfgsState, UpdateReport
from .linalg import (
    SpdFactorization,
    SymMatrix,
    ldlt_factorize,
    max_eigenvalue,
    min_eigenvalue,
    solve_spd,
)
from .oracles import (
    LogisticOracle,
    OracleEval,
    QuadraticOracle,
    RegularizedView,
    StochasticOracle,
    logistic_per_sample_gradient,
    logistic_per_sample_loss,
    make_rank_deficient_quadratic,
    regularized_gap_check,
    variance_estimate,
)
from .schedules import (
    PowerLawSchedule,
    ValidationReport,
    bound_condition_onset,
    rate_envelope,
    validate_almost_sure,
    validate_mean,
)
from .solvers import (
    ComparisonRow,
    RunTrace,
    SolverConfig,
    SolverState,
    TraceRecord,
    compare,
    estimate_theta,
    run,
    step_crsqn,
    step_res,
    step_sa,
)
from .traceio import read_trace, write_comparison_csv, write_trace

__version__ = "0.1.0"

__all__ = [
    "CRSQNClassifier",
    "ComparisonRow",
    "CyclicBfgsState",
    "Dataset",
    "LogisticOracle",
    "OracleEval",
    "PowerLawSchedule",
    "QuadraticOracle",
    "RegularizedView",
    "RunTrace",
    "SolverConfig",
    "SolverState",
    "SpdFactorization",
    "StandardizationStats",
    "StochasticOracle",
    "SymMatrix",
    "TraceRecord",
    "UpdateReport",
    "ValidationReport",
    "bound_condition_onset",
    "compare",
    "estimate_theta",
    "ldlt_factorize",
    "load_csv",
    "logistic_per_sample_gradient",
    "logistic_per_sample_loss",
    "make_rank_deficient_quadratic",
    "max_eigenvalue",
    "min_eigenvalue",
    "rate_envelope",
    "read_trace",
    "regularized_gap_check",
    "run",
    "solve_spd",
    "standardize",
    "step_crsqn",
    "step_res",
    "step_sa",
    "synthetic_classification_dataset",
    "validate_almost_sure",
    "validate_mean",
    "variance_estimate",
    "write_comparison_csv",
    "write_trace",
]
