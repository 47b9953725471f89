"""Dense LU with partial pivoting, triangular solves and 1-norm condition estimates.

The factorization is recursive (split the column range in halves) so that
almost all O(n**3) work lands in matrix-matrix updates ``C -= A @ B``.  Large
updates are evaluated exactly in fixed point through :mod:`mqkansa._rns`:
each row of ``A`` and each column of ``B`` is scaled by a power of two,
rounded to ``bits + GUARD_BITS`` bits, multiplied exactly, and rounded back to
the working precision.  The scaling error is far below the rounding error of
the working precision, so the result is as accurate as an ordinary
floating-point product at that precision.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import gmpy2
import numpy as np

from . import _rns
from .precision import (BigScalar, DenseMatrix, DenseVector, PrecisionContext,
                        same_context)

GUARD_BITS = 64
# panel width below which columns are eliminated one at a time
BASE_WIDTH = 8
# inner dimension from which C -= A @ B goes through the residue kernel
RNS_MIN_INNER = 24
# residue storage budget per operand tile, bytes
TILE_BYTES = 192 * 2**20


class SingularMatrixError(np.linalg.LinAlgError):
    """A pivot column is exactly zero at working precision."""


class PrecisionWarning(RuntimeWarning):
    """The working precision looks too small for the conditioning of a system."""


@dataclass(frozen=True)
class LUFactors:
    """Combined factors of ``P A = L U``.

    ``lu`` holds ``U`` on and above the diagonal and the multipliers of the
    unit lower triangle ``L`` below it.  ``perm[i]`` is the row of ``A`` that
    ended up in row ``i``.
    """

    lu: DenseMatrix
    perm: np.ndarray

    @property
    def ctx(self) -> PrecisionContext:
        return self.lu.ctx

    @property
    def n(self) -> int:
        return self.lu.rows

    def lower(self) -> DenseMatrix:
        n, a = self.n, self.lu.data
        one, zero = self.ctx.mpfr(1), self.ctx.mpfr(0)
        out = np.full((n, n), zero, dtype=object)
        for i in range(n):
            out[i, :i] = a[i, :i]
            out[i, i] = one
        return DenseMatrix(out, self.ctx, check=False)

    def upper(self) -> DenseMatrix:
        n, a = self.n, self.lu.data
        out = np.full((n, n), self.ctx.mpfr(0), dtype=object)
        for i in range(n):
            out[i, i:] = a[i, i:]
        return DenseMatrix(out, self.ctx, check=False)


# ---------------------------------------------------------------------------
# factorization

def lu_factor(A: DenseMatrix, *, overwrite_a: bool = False) -> LUFactors:
    """Factor ``P A = L U`` with partial pivoting.

    The pivot in each column is the entry of largest absolute value; ties go
    to the lowest row index.  With ``overwrite_a=True`` the storage of ``A``
    is reused for the factors and ``A`` must not be used afterwards.

    Raises
    ------
    SingularMatrixError
        If a pivot column is exactly zero.
    """
    n, m = A.shape
    if n != m:
        raise ValueError(f"lu_factor needs a square matrix, got {A.shape}")
    if overwrite_a:
        a = A.data
        a.flags.writeable = True
    else:
        a = A.data.copy()
    perm = np.arange(n)
    with A.ctx.local():
        _recursive_lu(a, perm, 0, n, A.ctx)
    return LUFactors(DenseMatrix(a, A.ctx, check=False), perm)


def _recursive_lu(a, perm, c0, c1, ctx):
    width = c1 - c0
    if width <= BASE_WIDTH:
        _panel_lu(a, perm, c0, c1)
        return
    mid = c0 + width // 2
    _recursive_lu(a, perm, c0, mid, ctx)
    _trsm_unit_lower(a, c0, mid, mid, c1, ctx)
    gemm_sub(a, (mid, a.shape[0]), (c0, mid), (mid, c1), ctx)
    _recursive_lu(a, perm, mid, c1, ctx)


def _panel_lu(a, perm, c0, c1):
    for k in range(c0, c1):
        col = a[k:, k]
        p = k + int(np.argmax(np.abs(col)))
        piv = a[p, k]
        if piv == 0:
            raise SingularMatrixError(f"zero pivot column {k}")
        if p != k:
            a[[k, p], :] = a[[p, k], :]
            perm[[k, p]] = perm[[p, k]]
        a[k + 1:, k] = a[k + 1:, k] / piv
        if k + 1 < c1:
            a[k + 1:, k + 1:c1] -= np.multiply.outer(a[k + 1:, k], a[k, k + 1:c1])


def _trsm_unit_lower(a, r0, r1, c0, c1, ctx):
    # a[r0:r1, c0:c1] <- L^-1 a[r0:r1, c0:c1], L = unit lower part of a[r0:r1, r0:r1]
    if r1 - r0 <= BASE_WIDTH:
        for j in range(r0, r1 - 1):
            a[j + 1:r1, c0:c1] -= np.multiply.outer(a[j + 1:r1, j], a[j, c0:c1])
        return
    mid = (r0 + r1) // 2
    _trsm_unit_lower(a, r0, mid, c0, c1, ctx)
    gemm_sub(a, (mid, r1), (r0, mid), (c0, c1), ctx)
    _trsm_unit_lower(a, mid, r1, c0, c1, ctx)


def gemm_sub(a, rows, inner, cols, ctx):
    """In place ``a[rows, cols] -= a[rows, inner] @ a[inner, cols]``."""
    (r0, r1), (i0, i1), (c0, c1) = rows, inner, cols
    if r1 <= r0 or c1 <= c0 or i1 <= i0:
        return
    left = a[r0:r1, i0:i1]
    right = a[i0:i1, c0:c1]
    if i1 - i0 < RNS_MIN_INNER:
        a[r0:r1, c0:c1] = a[r0:r1, c0:c1] - left @ right
    else:
        a[r0:r1, c0:c1] = a[r0:r1, c0:c1] - fixed_point_matmul(left, right, ctx)


# ---------------------------------------------------------------------------
# fixed-point products through the residue kernel

_exp = gmpy2.get_exp


def _row_exponents(block: np.ndarray) -> list:
    out = []
    for row in block:
        e = None
        for v in row:
            if v:
                ev = _exp(v)
                if e is None or ev > e:
                    e = ev
        out.append(e)
    return out


def _to_fixed_bytes(block: np.ndarray, exps: list, width: int, nbytes: int) -> bytes:
    """Entries rounded to ``round(x * 2**(width - e))``, e = the row's exponent."""
    parts = []
    append = parts.append
    zero = bytes(nbytes)
    for row, e in zip(block, exps):
        for v in row:
            if not v or e is None:
                append(zero)
                continue
            man, ex = v.as_mantissa_exp()
            s = ex + width - e
            if s >= 0:
                man <<= s
            else:
                man = (man + (1 << (-s - 1))) >> -s
            append(man.to_bytes(nbytes, "little", signed=True))
    return b"".join(parts)


def fixed_point_matmul(left: np.ndarray, right: np.ndarray, ctx: PrecisionContext) -> np.ndarray:
    """``left @ right`` for mpfr object arrays, rounded to the context precision.

    Caller must hold ``ctx.local()``.  Each row of ``left`` and column of
    ``right`` is quantized to ``bits + GUARD_BITS`` bits relative to its
    largest entry; the integer product is exact.
    """
    m, k = left.shape
    n = right.shape[1]
    width = ctx.bits + GUARD_BITS
    nbytes = 2 * ((width + 2 + _rns.LIMB_BITS - 1) // _rns.LIMB_BITS)
    prod_bits = 2 * (width + 1) + k.bit_length()
    basis = _rns.basis_for_bits(prod_bits)
    # drop low bits that lie far below the quantization error of the inputs
    drop_limbs = max(0, (width - 128) // _rns.LIMB_BITS)

    row_e = _row_exponents(left)
    col_e = _row_exponents(right.T)
    out = np.empty((m, n), dtype=object)
    zero = ctx.mpfr(0)

    per_entry = basis.count * 4
    col_tile = max(1, min(n, TILE_BYTES // (per_entry * k)))
    row_tile = max(1, min(m, TILE_BYTES // (per_entry * k)))
    # CRT input stays below ~64 MB of float64
    crt_entries = max(1, (64 * 2**20) // (basis.count * 8))
    shift0 = _rns.LIMB_BITS * drop_limbs - 2 * width

    for cs in range(0, n, col_tile):
        ce = min(n, cs + col_tile)
        rb = _rns.residues_from_bytes(
            _to_fixed_bytes(right[:, cs:ce].T, col_e[cs:ce], width, nbytes), nbytes, basis)
        # stored transposed: (primes, cols, k) -> (primes, k, cols)
        rb = rb.reshape(basis.count, ce - cs, k).transpose(0, 2, 1)
        for rs in range(0, m, row_tile):
            re_ = min(m, rs + row_tile)
            ra = _rns.residues_from_bytes(
                _to_fixed_bytes(left[rs:re_], row_e[rs:re_], width, nbytes), nbytes, basis)
            ra = ra.reshape(basis.count, re_ - rs, k)
            rows = re_ - rs
            cols = ce - cs
            step = max(1, crt_entries // cols)
            for s in range(0, rows, step):
                e = min(rows, s + step)
                prod = _rns.int_matmul_residues(ra[:, s:e, :], rb, basis)
                vals = _rns.crt_to_ints(prod.reshape(basis.count, (e - s) * cols), basis, drop_limbs)
                it = iter(vals)
                for i in range(rs + s, rs + e):
                    ei = row_e[i]
                    orow = out[i]
                    for j in range(cs, ce):
                        v = next(it)
                        ej = col_e[j]
                        if ei is None or ej is None or not v:
                            orow[j] = zero
                        else:
                            orow[j] = gmpy2.mul_2exp(gmpy2.mpfr(v), ei + ej + shift0)
    return out


# ---------------------------------------------------------------------------
# solves

def _dot(xs, ys, acc):
    # ascending-index sequential fused multiply-add
    fma = gmpy2.fma
    for x, y in zip(xs, ys):
        acc = fma(x, y, acc)
    return acc


def lu_solve(f: LUFactors, b: DenseVector, *, trans: bool = False) -> DenseVector:
    """Solve ``A x = b`` (or ``A^T x = b``) from the factors of ``A``.

    Every inner product is a sequential fused multiply-add over ascending
    column index, so results do not depend on the runtime.
    """
    ctx = same_context(f.lu, b)
    n = f.n
    if b.size != n:
        raise ValueError(f"dimension mismatch: factors are {n}x{n}, b has {b.size} entries")
    a = f.lu.data
    with ctx.local():
        zero = gmpy2.mpfr(0)
        if not trans:
            y = np.empty(n, dtype=object)
            bp = b.data[f.perm]
            for i in range(n):
                y[i] = bp[i] - _dot(a[i, :i], y[:i], zero)
            x = np.empty(n, dtype=object)
            for i in range(n - 1, -1, -1):
                x[i] = (y[i] - _dot(a[i, i + 1:], x[i + 1:], zero)) / a[i, i]
        else:
            # A^T = U^T L^T P
            w = np.empty(n, dtype=object)
            for i in range(n):
                w[i] = (b.data[i] - _dot(a[:i, i], w[:i], zero)) / a[i, i]
            v = np.empty(n, dtype=object)
            for i in range(n - 1, -1, -1):
                v[i] = w[i] - _dot(a[i + 1:, i], v[i + 1:], zero)
            x = np.empty(n, dtype=object)
            x[f.perm] = v
    return DenseVector(x, ctx, check=False)


def residual_inf_norm(A: DenseMatrix, x: DenseVector, b: DenseVector) -> BigScalar:
    """``max_i |(A x - b)_i|`` with ascending-column summation per row."""
    ctx = same_context(A, x, b)
    if A.cols != x.size or A.rows != b.size:
        raise ValueError(f"dimension mismatch: A {A.shape}, x ({x.size},), b ({b.size},)")
    with ctx.local():
        worst = gmpy2.mpfr(0)
        for row, bi in zip(A.data, b.data):
            r = abs(_dot(row, x.data, -bi))
            if r > worst:
                worst = r
    return BigScalar(worst, ctx)


# ---------------------------------------------------------------------------
# condition number

MAX_ESTIMATOR_ITERATIONS = 5


def inverse_norm1_estimate(f: LUFactors, *, transpose: bool = False) -> BigScalar:
    """Hager/Higham lower estimate of ``||A^-1||_1`` from LU factors.

    At most five solve pairs with ``A`` and ``A^T``, followed by Higham's
    alternating-sign test vector (one extra solve); the larger value wins.
    With ``transpose=True`` the estimate is of ``||A^-T||_1 = ||A^-1||_inf``.
    """
    ctx, n = f.ctx, f.n
    with ctx.local():
        one = gmpy2.mpfr(1)
        x = DenseVector(np.array([one / n] * n, dtype=object), ctx, check=False)
        est = gmpy2.mpfr(0)
        last_j = None
        for it in range(MAX_ESTIMATOR_ITERATIONS):
            y = lu_solve(f, x, trans=transpose)
            new_est = y.norm1().value
            if it > 0 and new_est <= est:
                break
            est = new_est
            xi = np.array([one if v >= 0 else -one for v in y.data], dtype=object)
            z = lu_solve(f, DenseVector(xi, ctx, check=False), trans=not transpose)
            absz = [abs(v) for v in z.data]
            j = int(np.argmax(np.array(absz, dtype=object)))
            ztx = _dot(z.data, x.data, gmpy2.mpfr(0))
            if it > 0 and (absz[j] <= ztx or j == last_j):
                break
            last_j = j
            e = np.full(n, gmpy2.mpfr(0), dtype=object)
            e[j] = one
            x = DenseVector(e, ctx, check=False)
        if n > 1:
            alt = np.array([(one if i % 2 == 0 else -one) * (1 + gmpy2.mpfr(i) / (n - 1))
                            for i in range(n)], dtype=object)
            t = lu_solve(f, DenseVector(alt, ctx, check=False), trans=transpose).norm1().value
            t = 2 * t / (3 * n)
            if t > est:
                est = t
    return BigScalar(est, ctx)


def cond_estimate(A: DenseMatrix, factors: LUFactors | None = None, norm: str = "1") -> BigScalar:
    """Estimate of the condition number ``||A|| ||A^-1||`` in the 1- or inf-norm.

    The inverse norm comes from :func:`inverse_norm1_estimate`, a lower bound
    that is usually within a small factor of the truth.  Pass ``factors`` to
    reuse an existing factorization.
    """
    if norm not in ("1", "inf"):
        raise ValueError(f"norm must be '1' or 'inf', got {norm!r}")
    if factors is None:
        factors = lu_factor(A)
    anorm = A.norm1() if norm == "1" else A.norm_inf()
    inv = inverse_norm1_estimate(factors, transpose=(norm == "inf"))
    with A.ctx.local():
        return BigScalar(anorm.value * inv.value, A.ctx)


def check_residual(residual: BigScalar, b_norm: BigScalar, limit_log10: float = -20.0) -> float:
    """Warn with :class:`PrecisionWarning` when ``residual / ||b||`` exceeds ``10**limit_log10``.

    Returns the log10 of the relative residual.
    """
    rel = residual.log10() - b_norm.log10() if not b_norm.is_zero() else residual.log10()
    if rel > limit_log10:
        warnings.warn(
            f"relative residual 1e{rel:.1f} exceeds 1e{limit_log10:g}; "
            f"{residual.ctx.digits} digits may be too few for this system",
            PrecisionWarning, stacklevel=2)
    return rel


def residual_bound_log10(digits: int, cond: BigScalar) -> int:
    """Exponent of the accepted relative residual ``10**(-digits + ceil(log10 COND) + 20)``."""
    return -digits + math.ceil(cond.log10()) + 20
