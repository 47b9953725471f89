"""Kansa collocation: assembly, solve, evaluation and error measurement.

Kernel entries depend on the squared distance between two points only, and
on tensor grids that distance takes few distinct values.  Assembly and
evaluation therefore compute each distinct ``(dx**2, dy**2)`` combination
once and fill matrices with references to the shared ``mpfr`` objects, which
keeps a 1681 x 1681 system at a few tens of megabytes until it is factored.
"""
from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2
import numpy as np

from ._validation import as_fraction, check_points
from .kernels import MultiquadricKernel
from .linalg import (LUFactors, PrecisionWarning, SingularMatrixError, _dot, check_residual,
                     inverse_norm1_estimate, lu_factor, lu_solve, residual_bound_log10,
                     residual_inf_norm)
from .precision import BigScalar, DenseMatrix, DenseVector, PrecisionContext, format_decimal, parse_decimal
from .problems import CollocationProblem

SOLUTION_FORMAT = "mqkansa.solution/1"

# test points evaluated per block (bounds the size of the index arrays)
_EVAL_BLOCK = 1024


# ---------------------------------------------------------------------------
# distance tables

def _axis_tables(rows: list, cols: list, dim: int, ctx: PrecisionContext):
    """Per-axis ids of the exact squared differences between row and column points.

    Returns ``(ids, values)``: ``ids[a]`` is an int array (len(rows), len(cols))
    indexing ``values[a]``, the distinct squared differences along axis ``a``
    as mpfr.
    """
    ids, values = [], []
    for a in range(dim):
        ru, rinv = _unique(p[a] for p in rows)
        cu, cinv = _unique(p[a] for p in cols)
        table: dict[Fraction, int] = {}
        grid = np.empty((len(ru), len(cu)), dtype=np.int64)
        for i, x in enumerate(ru):
            for j, y in enumerate(cu):
                d = x - y
                grid[i, j] = table.setdefault(d * d, len(table))
        vals = [None] * len(table)
        for d2, k in table.items():
            vals[k] = ctx.mpfr(d2)
        ids.append(grid[np.ix_(rinv, cinv)])
        values.append(vals)
    return ids, values


def _unique(coords) -> tuple[list, np.ndarray]:
    seen: dict[Fraction, int] = {}
    inv = [seen.setdefault(x, len(seen)) for x in coords]
    return list(seen), np.asarray(inv, dtype=np.int64)


def _distance_keys(ids: list, values: list):
    """Collapse per-axis ids into one key per pair; returns (inverse, r2 list)."""
    if len(ids) == 1:
        flat = ids[0]
        uniq, inv = np.unique(flat, return_inverse=True)
        with_r2 = [values[0][k] for k in uniq]
        return inv.reshape(flat.shape), with_r2, uniq
    kx, ky = ids
    width = max(len(values[0]), len(values[1]))
    key = kx * width + ky
    uniq, inv = np.unique(key, return_inverse=True)
    r2 = [values[0][k // width] + values[1][k % width] for k in uniq.tolist()]
    return inv.reshape(key.shape), r2, uniq


# ---------------------------------------------------------------------------
# assembly

def _check_dims(problem: CollocationProblem, kernel: MultiquadricKernel):
    if kernel.dim != problem.dim:
        raise ValueError(f"kernel dim {kernel.dim} does not match problem dim {problem.dim}")


def _assemble_data(problem: CollocationProblem, kernel: MultiquadricKernel):
    """Object array of the collocation matrix (shared entries) and the right-hand side."""
    _check_dims(problem, kernel)
    ctx = kernel.ctx
    centers = problem.centers
    n_int = len(problem.interior)
    ids, values = _axis_tables(centers, centers, problem.dim, ctx)
    with ctx.local():
        inv, r2s, _ = _distance_keys(ids, values)
        phi = np.empty(len(r2s), dtype=object)
        lap = np.empty(len(r2s), dtype=object)
        for k, r2 in enumerate(r2s):
            phi[k], lap[k] = kernel.both_r2(r2)
    a = np.empty(inv.shape, dtype=object)
    a[:n_int] = lap[inv[:n_int]]
    a[n_int:] = phi[inv[n_int:]]
    b = np.empty(len(centers), dtype=object)
    sol = problem.solution
    with ctx.local():
        rate = ctx.mpfr(sol.rate)
        for i, p in enumerate(centers):
            r2 = _norm2(p, ctx)
            b[i] = sol.laplacian_mp(r2, rate, problem.dim) if i < n_int else sol.exact_mp(r2, rate)
    return a, b


def _norm2(p, ctx):
    s = gmpy2.mpfr(0)
    for x in p:
        v = ctx.mpfr(x)
        s += v * v
    return s


def assemble(problem: CollocationProblem, kernel: MultiquadricKernel) -> tuple[DenseMatrix, DenseVector]:
    """Collocation matrix and right-hand side.

    Row ``i`` of an interior node holds ``Laplacian(phi)(p_i - x_j)`` and
    ``f(p_i)``; a boundary row holds ``phi(p_i - x_j)`` and ``g(p_i)``.
    Interior rows come first, columns follow the same center order.
    """
    a, b = _assemble_data(problem, kernel)
    return DenseMatrix(a, kernel.ctx, check=False), DenseVector(b, kernel.ctx, check=False)


# ---------------------------------------------------------------------------
# solution

@dataclass
class CollocationSolution:
    """Coefficients of ``u_hat(x) = sum_j lambda_j phi(x - x_j)`` plus solve diagnostics."""

    kernel: MultiquadricKernel
    centers: list
    lam: DenseVector
    cond: BigScalar | None = None
    residual: BigScalar | None = None
    solve_time: float = 0.0
    relative_residual_log10: float | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.lam) != len(self.centers):
            raise ValueError(f"{len(self.lam)} coefficients for {len(self.centers)} centers")

    @property
    def ctx(self) -> PrecisionContext:
        return self.kernel.ctx

    # serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        def dec(x):
            return None if x is None else x.to_decimal()
        return {
            "format": SOLUTION_FORMAT,
            "digits": self.ctx.digits,
            "kernel": {"beta": str(self.kernel.beta), "c": self.kernel.c.to_decimal(),
                       "dim": self.kernel.dim},
            "centers": [[str(x) for x in p] for p in self.centers],
            "lambda": self.lam.to_decimal(),
            "diagnostics": {"cond": dec(self.cond), "residual": dec(self.residual),
                            "solve_seconds": self.solve_time},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: dict) -> "CollocationSolution":
        if data.get("format") != SOLUTION_FORMAT:
            raise ValueError(f"unsupported solution format {data.get('format')!r}")
        ctx = PrecisionContext(int(data["digits"]))
        k = data["kernel"]
        kernel = MultiquadricKernel(Fraction(k["beta"]), parse_decimal(k["c"], ctx), int(k["dim"]), ctx)
        centers = [tuple(Fraction(x) for x in p) for p in data["centers"]]
        lam = DenseVector.from_decimal(data["lambda"], ctx)
        d = data.get("diagnostics", {})
        cond = None if d.get("cond") is None else BigScalar.from_decimal(d["cond"], ctx)
        res = None if d.get("residual") is None else BigScalar.from_decimal(d["residual"], ctx)
        return cls(kernel, centers, lam, cond, res, float(d.get("solve_seconds", 0.0)))

    @classmethod
    def loads(cls, text: str) -> "CollocationSolution":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "CollocationSolution":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def solve(problem: CollocationProblem, kernel: MultiquadricKernel,
          ctx: PrecisionContext | None = None, *, estimate_cond: bool = True) -> CollocationSolution:
    """Assemble, factor and solve the collocation system.

    ``cond`` is the infinity-norm condition estimate ``||A||_inf * est(||A^-1||_inf)``
    and ``residual`` is ``||A lambda - b||_inf`` computed from the unfactored
    entries.

    Raises
    ------
    SingularMatrixError
        If the system is exactly singular.

    Warns
    -----
    PrecisionWarning
        If ``residual / ||b||_inf`` exceeds ``1e-20``.
    """
    ctx = kernel.ctx if ctx is None else ctx
    if ctx != kernel.ctx:
        raise ValueError(f"kernel carries {kernel.ctx.digits} digits, solve asked for {ctx.digits}")
    t0 = time.perf_counter()
    a, b = _assemble_data(problem, kernel)
    A = DenseMatrix(a, ctx, check=False)
    bv = DenseVector(b, ctx, check=False)
    anorm = A.norm_inf() if estimate_cond else None
    # the factorization gets its own reference array; entries are shared, not copied
    work = DenseMatrix(a.copy(), ctx, check=False)
    factors = lu_factor(work, overwrite_a=True)
    lam = lu_solve(factors, bv)
    cond = None
    if estimate_cond:
        with ctx.local():
            cond = BigScalar(anorm.value * inverse_norm1_estimate(factors, transpose=True).value, ctx)
    residual = residual_inf_norm(A, lam, bv)
    elapsed = time.perf_counter() - t0
    rel = check_residual(residual, bv.inf_norm())
    return CollocationSolution(kernel, problem.centers, lam, cond, residual, elapsed, rel)


def residual_gate(sol: CollocationSolution, b_norm: BigScalar | None = None) -> bool:
    """True when ``residual / ||b||_inf <= 10**(-digits + ceil(log10 cond) + 20)``."""
    if sol.cond is None or sol.residual is None:
        raise ValueError("solution has no cond/residual diagnostics")
    rel = sol.relative_residual_log10
    if rel is None:
        rel = sol.residual.log10() - b_norm.log10()
    return rel <= residual_bound_log10(sol.ctx.digits, sol.cond)


# ---------------------------------------------------------------------------
# evaluation

def evaluate_many(sol: CollocationSolution, points: Sequence) -> list:
    """``u_hat`` at each point as mpfr, each sum taken in center order."""
    ctx, kernel = sol.ctx, sol.kernel
    pts = check_points(points, kernel.dim)
    if not pts:
        return []
    lam = sol.lam.data
    out = []
    with ctx.local():
        zero = gmpy2.mpfr(0)
        for s in range(0, len(pts), _EVAL_BLOCK):
            block = pts[s:s + _EVAL_BLOCK]
            ids, values = _axis_tables(block, sol.centers, kernel.dim, ctx)
            inv, r2s, _ = _distance_keys(ids, values)
            phi = np.array([kernel.value_r2(r2) for r2 in r2s], dtype=object)
            for row in inv:
                out.append(_dot(phi[row], lam, zero))
    return out


def evaluate(sol: CollocationSolution, point) -> BigScalar:
    """``u_hat(point) = sum_j lambda_j phi(point - x_j)``."""
    if not isinstance(point, (tuple, list)):
        point = (point,)
    return BigScalar(evaluate_many(sol, [point])[0], sol.ctx)


@dataclass(frozen=True)
class ErrorReport:
    """Root-mean-square errors over the domain and the boundary test points."""

    rms: BigScalar
    rms_boundary: BigScalar
    n_test_domain: int
    n_test_boundary: int


def rms_error(approx: Sequence, exact: Sequence, ctx: PrecisionContext) -> BigScalar:
    """``sqrt(mean |exact - approx|**2)``."""
    if len(approx) != len(exact) or not approx:
        raise ValueError("rms needs two nonempty sequences of equal length")
    with ctx.local():
        s = gmpy2.mpfr(0)
        for a, e in zip(approx, exact):
            d = e - a
            s = gmpy2.fma(d, d, s)
        return BigScalar(gmpy2.sqrt(s / len(approx)), ctx)


def error_report(sol: CollocationSolution, problem: CollocationProblem) -> ErrorReport:
    """RMS error over the domain test points and over the boundary test points."""
    ctx = sol.ctx
    if not problem.tests_domain or not problem.tests_boundary:
        raise ValueError("error_report needs nonempty test point sets")
    out = []
    for pts in (problem.tests_domain, problem.tests_boundary):
        approx = evaluate_many(sol, pts)
        exact = [problem.solution.exact(p, ctx).value for p in pts]
        out.append(rms_error(approx, exact, ctx))
    return ErrorReport(out[0], out[1], len(problem.tests_domain), len(problem.tests_boundary))


__all__ = [
    "CollocationSolution", "ErrorReport", "PrecisionWarning", "SingularMatrixError", "assemble",
    "error_report", "evaluate", "evaluate_many", "residual_gate", "rms_error", "solve",
]
