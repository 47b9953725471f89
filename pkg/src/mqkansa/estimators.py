"""Estimator-style wrappers (``fit`` / ``predict`` / ``get_params``).

They follow the scikit-learn conventions so they compose with
``sklearn.base.clone`` and parameter grids, but ``fit`` takes a
:class:`~mqkansa.problems.CollocationProblem` (or nothing, to use the
``problem`` parameter) instead of a feature matrix: a boundary value problem
is not a labelled data set.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_points, parse_shape
from .collocation import error_report, evaluate_many, solve
from .config import RunConfig
from .kernels import MultiquadricKernel
from .precision import BigScalar, PrecisionContext
from .problems import DEFAULTS, CollocationProblem, make_problem
from .search import SearchConfig, directed_search


def _resolve_problem(problem, X):
    if X is not None:
        if not isinstance(X, CollocationProblem):
            raise TypeError(f"fit expects a CollocationProblem, got {type(X).__name__}")
        return X
    if isinstance(problem, CollocationProblem):
        return problem
    if isinstance(problem, str):
        return make_problem(problem)
    if isinstance(problem, dict):
        cfg = RunConfig(mode="solve", problem=dict(problem), digits=100, c="1")
        return cfg.build_problem()
    raise TypeError(f"problem must be a name, a mapping or a CollocationProblem, got {problem!r}")


def _default(problem, key, value):
    if value is not None:
        return value
    name = problem if isinstance(problem, str) else getattr(problem, "name", None)
    if name in DEFAULTS:
        return DEFAULTS[name][key]
    raise ValueError(f"{key} is required for problem {name!r}")


class KansaCollocation(BaseEstimator):
    """Kansa collocation with a generalized multiquadric at one shape parameter.

    Parameters
    ----------
    problem : str, dict or CollocationProblem, default "paper-1d"
    beta : number, default -1
    c : shape parameter (number or expression such as ``"800*sqrt(2)*1e14"``);
        defaults to the named problem's predicted value
    digits : working precision; defaults to the named problem's setting
    estimate_cond : bool, default True

    Attributes
    ----------
    solution_ : CollocationSolution
    problem_ : CollocationProblem
    cond_, residual_ : BigScalar
    """

    def __init__(self, problem="paper-1d", beta=-1, c=None, digits=None, estimate_cond=True):
        self.problem = problem
        self.beta = beta
        self.c = c
        self.digits = digits
        self.estimate_cond = estimate_cond

    def fit(self, X=None, y=None):
        problem = _resolve_problem(self.problem, X)
        digits = _default(self.problem if X is None else problem, "digits", self.digits)
        ctx = PrecisionContext(int(digits))
        c = parse_shape(_default(self.problem if X is None else problem, "c0", self.c), ctx)
        kernel = MultiquadricKernel(Fraction(str(self.beta)), c, problem.dim, ctx)
        self.problem_ = problem
        self.ctx_ = ctx
        self.solution_ = solve(problem, kernel, estimate_cond=self.estimate_cond)
        self.cond_ = self.solution_.cond
        self.residual_ = self.solution_.residual
        return self

    def _check_fitted(self):
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit before using this estimator")

    def predict(self, X) -> np.ndarray:
        """Approximate solution at the points ``X`` as an object array of BigScalar."""
        self._check_fitted()
        pts = check_points(X, self.problem_.dim, "X")
        vals = evaluate_many(self.solution_, pts)
        out = np.empty(len(vals), dtype=object)
        out[:] = [BigScalar(v, self.ctx_) for v in vals]
        return out

    def error_report(self):
        """RMS and boundary RMS on the problem's test points."""
        self._check_fitted()
        return error_report(self.solution_, self.problem_)

    def score(self, X=None, y=None) -> float:
        """``-log10(RMS)`` over the problem's test points (higher is better)."""
        return -self.error_report().rms.log10()


class ShapeParameterSearch(BaseEstimator):
    """Directed search for the shape parameter minimizing the boundary RMS.

    Parameters
    ----------
    problem, beta, digits : as for :class:`KansaCollocation`
    c0 : starting value; defaults to the named problem's predicted value
    steps : list of step strings (``"500"``, ``"x1.5"``); default additive ``c0/10``
    grid : explicit candidate c values (alternative to ``steps``)
    max_evals : int, default 50
    workers : concurrent solves in the initial probe

    Attributes
    ----------
    best_c_ : BigScalar
    trace_ : list of SweepRecord, in evaluation order
    status_ : str
    """

    def __init__(self, problem="paper-1d", beta=-1, digits=None, c0=None, steps=None, grid=None,
                 max_evals=50, workers=1):
        self.problem = problem
        self.beta = beta
        self.digits = digits
        self.c0 = c0
        self.steps = steps
        self.grid = grid
        self.max_evals = max_evals
        self.workers = workers

    def fit(self, X=None, y=None, criterion=None):
        problem = _resolve_problem(self.problem, X) if criterion is None or X is not None else None
        ref = self.problem if X is None else problem
        ctx = PrecisionContext(int(_default(ref, "digits", self.digits)))
        config = SearchConfig(c0=_default(ref, "c0", self.c0), steps=list(self.steps or []),
                              grid=None if self.grid is None else list(self.grid),
                              max_evals=self.max_evals)
        res = directed_search(problem, Fraction(str(self.beta)), config, ctx,
                              workers=self.workers, criterion=criterion)
        self.best_c_ = res.best_c
        self.trace_ = res.trace
        self.status_ = res.status
        self.best_record_ = res.best
        return self
