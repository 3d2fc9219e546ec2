"""Mixed-precision iterative refinement with explicit interprecision transfers.

Three precisions are in play at once: the matrix is factored narrow
(TF), the problem lives at its own width (TW), and residuals plus
corrections accumulate wide (TR). Every move of data between formats is
an explicit, counted operation, every kernel pins its operation order,
and identical inputs produce bitwise identical outputs. Two triangular
solve strategies bridge the factor and residual precisions: widen the
factors element by element on the fly, or scale the residual down and
solve narrow.
"""

from .bench import RunRecord, emit_table, parse_records, records_to_json, run_benchmark
from .checks import CheckCache, CheckResult, run_checks
from .counters import TransferCounter, count_transfers
from .factor import (
    FactorError,
    InplaceSolve,
    LUFactors,
    NonFiniteError,
    ZeroPivotError,
    lu_factor,
    promote_factors,
    solve_inplace,
    solve_otf,
    solve_plain,
)
from .ir import (
    IRConfig,
    IRHistory,
    IRResult,
    Policy,
    Reason,
    Solver,
    error_bound,
    ir_solve,
    iteration_matrices,
    terminate_rate_estimate,
    terminate_residual,
)
from .mparray import (
    CastReport,
    PMatrix,
    PVector,
    bitwise_equal,
    cast_matrix,
    cast_vector,
    matrix_norm_inf,
    matvec_promoted,
    norm_inf,
    residual,
)
from .precision import CastFlag, Precision, TaggedScalar, downcast, half_op, promote_op, upcast
from .problems import (
    MatrixMarketError,
    ProblemSpec,
    RhsKind,
    build_operator,
    cond_inf_exact,
    dominant_eigenvalue,
    greens_kernel,
    greens_matrix,
    load_matrix_market,
    make_rhs,
)

__version__ = "0.1.0"

__all__ = [
    "Precision",
    "CastFlag",
    "TaggedScalar",
    "upcast",
    "downcast",
    "promote_op",
    "half_op",
    "PVector",
    "PMatrix",
    "CastReport",
    "cast_vector",
    "cast_matrix",
    "matvec_promoted",
    "residual",
    "norm_inf",
    "matrix_norm_inf",
    "bitwise_equal",
    "TransferCounter",
    "count_transfers",
    "FactorError",
    "ZeroPivotError",
    "NonFiniteError",
    "LUFactors",
    "InplaceSolve",
    "lu_factor",
    "promote_factors",
    "solve_plain",
    "solve_otf",
    "solve_inplace",
    "Solver",
    "Policy",
    "Reason",
    "IRConfig",
    "IRHistory",
    "IRResult",
    "ir_solve",
    "terminate_residual",
    "terminate_rate_estimate",
    "error_bound",
    "iteration_matrices",
    "RhsKind",
    "ProblemSpec",
    "greens_kernel",
    "greens_matrix",
    "build_operator",
    "make_rhs",
    "cond_inf_exact",
    "dominant_eigenvalue",
    "MatrixMarketError",
    "load_matrix_market",
    "RunRecord",
    "run_benchmark",
    "emit_table",
    "records_to_json",
    "parse_records",
    "CheckResult",
    "CheckCache",
    "run_checks",
    "__version__",
]
