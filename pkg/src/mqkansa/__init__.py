"""Kansa RBF collocation for Poisson problems in arbitrary precision."""

__version__ = "0.1.0"

from .collocation import (CollocationSolution, ErrorReport, assemble, error_report, evaluate,
                          evaluate_many, residual_gate, solve)
from .estimators import KansaCollocation, ShapeParameterSearch
from .kernels import MultiquadricKernel, UnsupportedBetaError, register_laplacian, sign_factor
from .linalg import (LUFactors, PrecisionWarning, SingularMatrixError, cond_estimate, lu_factor,
                     lu_solve, residual_inf_norm)
from .precision import BigScalar, DenseMatrix, DenseVector, PrecisionContext, PrecisionMismatchError
from .problems import (CollocationProblem, Domain, GridSpec, ManufacturedGaussian, generate_grid,
                       generate_test_points, make_problem, rhs_and_boundary)
from .search import (SearchConfig, SearchResult, Step, SweepRecord, TabulatedCriterion,
                     directed_search, sweep)

__all__ = [
    "BigScalar", "CollocationProblem", "CollocationSolution", "DenseMatrix", "DenseVector",
    "Domain", "ErrorReport", "GridSpec", "KansaCollocation", "LUFactors", "ManufacturedGaussian",
    "MultiquadricKernel", "PrecisionContext", "PrecisionMismatchError", "PrecisionWarning",
    "SearchConfig", "SearchResult", "ShapeParameterSearch", "SingularMatrixError", "Step",
    "SweepRecord", "TabulatedCriterion", "UnsupportedBetaError", "assemble", "cond_estimate",
    "directed_search", "error_report", "evaluate", "evaluate_many", "generate_grid",
    "generate_test_points", "lu_factor", "lu_solve", "make_problem", "register_laplacian",
    "residual_gate", "residual_inf_norm", "rhs_and_boundary", "sign_factor", "solve", "sweep",
]
