"""Arbitrary-precision scalars, dense containers and the decimal wire format.

Every quantity in the solver is a :class:`gmpy2.mpfr` created under a
:class:`PrecisionContext`.  Dense matrices and vectors are thin wrappers
around numpy object arrays of ``mpfr`` so that slicing and fancy indexing
stay cheap while every arithmetic operation runs at the requested precision.
"""
from __future__ import annotations

import math
import re
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Iterator

import gmpy2
import numpy as np

MIN_DIGITS = 50

_LOG2_10 = math.log2(10.0)


class PrecisionMismatchError(ValueError):
    """Raised when values from two different precision contexts are mixed."""


@dataclass(frozen=True)
class PrecisionContext:
    """Number of significant decimal digits carried by every operation.

    The binary precision is ``ceil(digits * log2(10))`` bits.  Use
    :meth:`local` to make the context active for gmpy2 arithmetic.
    """

    digits: int

    def __post_init__(self):
        if isinstance(self.digits, bool) or not isinstance(self.digits, (int, np.integer)):
            raise TypeError(f"digits must be an integer, got {self.digits!r}")
        if self.digits < MIN_DIGITS:
            raise ValueError(f"digits must be >= {MIN_DIGITS}, got {self.digits}")
        object.__setattr__(self, "digits", int(self.digits))

    @property
    def bits(self) -> int:
        return math.ceil(self.digits * _LOG2_10)

    @property
    def serial_digits(self) -> int:
        # enough decimal digits for an exact binary -> decimal -> binary round trip
        return self.digits + 2

    @contextmanager
    def local(self) -> Iterator[gmpy2.context]:
        """Activate this precision (round to nearest) for the enclosed block."""
        with gmpy2.context(gmpy2.get_context(), precision=self.bits,
                           round=gmpy2.RoundToNearest) as c:
            yield c

    def mpfr(self, value) -> gmpy2.mpfr:
        """Convert ``value`` (int, str, float, Fraction, mpfr) at this precision.

        Strings are parsed directly in decimal so ``"0.05"`` is the correctly
        rounded binary value, not the double nearest to 0.05.
        """
        if isinstance(value, BigScalar):
            value = value.value
        if isinstance(value, str):
            return gmpy2.mpfr(value.strip(), self.bits)
        if isinstance(value, (int, np.integer)):
            return gmpy2.mpfr(int(value), self.bits)
        if hasattr(value, "numerator") and hasattr(value, "denominator") and not isinstance(value, float):
            with self.local():
                return gmpy2.mpfr(value.numerator) / gmpy2.mpfr(value.denominator)
        return gmpy2.mpfr(value, self.bits)

    def scalar(self, value) -> "BigScalar":
        return BigScalar(self.mpfr(value), self)


# ---------------------------------------------------------------------------
# scalars

def _coerce(ctx: PrecisionContext, other):
    if isinstance(other, BigScalar):
        if other.ctx != ctx:
            raise PrecisionMismatchError(
                f"cannot mix {ctx.digits}-digit and {other.ctx.digits}-digit values")
        return other.value
    if isinstance(other, (int, np.integer)) and not isinstance(other, bool):
        return ctx.mpfr(other)
    if isinstance(other, type(gmpy2.mpfr(0))):
        if other.precision != ctx.bits:
            raise PrecisionMismatchError(
                f"mpfr with {other.precision} bits used with a {ctx.bits}-bit context")
        return other
    return NotImplemented


class BigScalar:
    """A real number carried at a fixed decimal precision.

    Arithmetic is delegated to gmpy2 under the owning context.  Mixing two
    scalars with different contexts raises :class:`PrecisionMismatchError`;
    plain Python integers are promoted exactly.
    """

    __slots__ = ("value", "ctx")

    def __init__(self, value, ctx: PrecisionContext):
        if not isinstance(value, type(gmpy2.mpfr(0))):
            value = ctx.mpfr(value)
        elif value.precision != ctx.bits:
            with ctx.local():
                value = +value
        self.value = value
        self.ctx = ctx

    # arithmetic -------------------------------------------------------
    def _binop(self, other, op, reflected=False):
        o = _coerce(self.ctx, other)
        if o is NotImplemented:
            return NotImplemented
        with self.ctx.local():
            r = op(o, self.value) if reflected else op(self.value, o)
        return BigScalar(r, self.ctx)

    def __add__(self, o):
        return self._binop(o, lambda a, b: a + b)

    def __radd__(self, o):
        return self._binop(o, lambda a, b: a + b, True)

    def __sub__(self, o):
        return self._binop(o, lambda a, b: a - b)

    def __rsub__(self, o):
        return self._binop(o, lambda a, b: a - b, True)

    def __mul__(self, o):
        return self._binop(o, lambda a, b: a * b)

    def __rmul__(self, o):
        return self._binop(o, lambda a, b: a * b, True)

    def __truediv__(self, o):
        return self._binop(o, lambda a, b: a / b)

    def __rtruediv__(self, o):
        return self._binop(o, lambda a, b: a / b, True)

    def __pow__(self, o):
        return self._binop(o, lambda a, b: a ** b)

    def __neg__(self):
        return BigScalar(-self.value, self.ctx)

    def __abs__(self):
        return BigScalar(abs(self.value), self.ctx)

    def sqrt(self) -> "BigScalar":
        with self.ctx.local():
            return BigScalar(gmpy2.sqrt(self.value), self.ctx)

    # comparisons ------------------------------------------------------
    def _cmp_value(self, other):
        o = _coerce(self.ctx, other)
        if o is NotImplemented:
            raise TypeError(f"cannot compare BigScalar with {type(other).__name__}")
        return o

    def __eq__(self, o):
        if not isinstance(o, (BigScalar, int, np.integer, type(gmpy2.mpfr(0)))):
            return NotImplemented
        return self.value == self._cmp_value(o)

    def __lt__(self, o):
        return self.value < self._cmp_value(o)

    def __le__(self, o):
        return self.value <= self._cmp_value(o)

    def __gt__(self, o):
        return self.value > self._cmp_value(o)

    def __ge__(self, o):
        return self.value >= self._cmp_value(o)

    def __hash__(self):
        return hash((self.value, self.ctx.digits))

    # conversions ------------------------------------------------------
    def __float__(self):
        return float(self.value)

    def log10(self) -> float:
        """log10 of ``|x|`` as a float, valid far outside the double range."""
        return log10_abs(self.value)

    def is_zero(self) -> bool:
        return self.value == 0

    def to_decimal(self) -> str:
        return format_decimal(self.value, self.ctx.serial_digits)

    @classmethod
    def from_decimal(cls, text: str, ctx: PrecisionContext) -> "BigScalar":
        return cls(parse_decimal(text, ctx), ctx)

    def __repr__(self):
        return f"BigScalar({format_decimal(self.value, 20)}, digits={self.ctx.digits})"

    def __str__(self):
        return self.to_decimal()


def log10_abs(x) -> float:
    if x == 0:
        return -math.inf
    if gmpy2.is_infinite(x):
        return math.inf
    e, m = gmpy2.frexp(x)
    return math.log10(abs(float(m))) + e * math.log10(2.0)


# ---------------------------------------------------------------------------
# decimal wire format: "-1.2345e-148", always scientific, explicit digit count

_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def format_decimal(x, digits: int) -> str:
    """Scientific notation with ``digits`` significant digits (``d.ddd...e±N``)."""
    if gmpy2.is_nan(x):
        return "nan"
    if gmpy2.is_infinite(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0." + "0" * (digits - 1) + "e+0" if digits > 1 else "0e+0"
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    exp -= 1
    body = mant[0] + ("." + mant[1:] if len(mant) > 1 else "")
    return f"{sign}{body}e{exp:+d}"


def parse_decimal(text: str, ctx: PrecisionContext) -> gmpy2.mpfr:
    t = text.strip()
    if t in ("inf", "+inf", "-inf", "nan"):
        return gmpy2.mpfr(t, ctx.bits)
    if not _DECIMAL_RE.match(t):
        raise ValueError(f"not a decimal number: {text!r}")
    return gmpy2.mpfr(t, ctx.bits)


# ---------------------------------------------------------------------------
# dense containers

def _as_object_array(data, ctx: PrecisionContext, ndim: int) -> np.ndarray:
    if isinstance(data, np.ndarray) and data.dtype == object:
        arr = data
    else:
        arr = np.empty(np.shape(data), dtype=object)
        flat = np.asarray(data, dtype=object).ravel() if np.ndim(data) else [data]
        arr.ravel()[:] = [ctx.mpfr(v) for v in flat] if len(flat) else []
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    return arr


def _check_entries(arr: np.ndarray, ctx: PrecisionContext) -> None:
    bits = ctx.bits
    mpfr_t = type(gmpy2.mpfr(0))
    for v in arr.ravel():
        if type(v) is not mpfr_t or v.precision != bits:
            raise PrecisionMismatchError(
                f"entry {v!r} is not an mpfr at {ctx.digits} digits")


class DenseMatrix:
    """Row-major dense matrix of ``mpfr`` entries sharing one context.

    The wrapped array is marked read-only; routines that want to reuse the
    storage (``lu_factor(..., overwrite_a=True)``) say so explicitly.
    """

    def __init__(self, data, ctx: PrecisionContext, *, check: bool = True):
        arr = _as_object_array(data, ctx, 2)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("matrix must have at least one row and column")
        if check:
            _check_entries(arr, ctx)
        arr.flags.writeable = False
        self.data = arr
        self.ctx = ctx

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable], ctx: PrecisionContext) -> "DenseMatrix":
        rows = [list(r) for r in rows]
        arr = np.empty((len(rows), len(rows[0]) if rows else 0), dtype=object)
        for i, r in enumerate(rows):
            if len(r) != arr.shape[1]:
                raise ValueError("ragged rows")
            arr[i, :] = [ctx.mpfr(v) for v in r]
        return cls(arr, ctx, check=False)

    @classmethod
    def identity(cls, n: int, ctx: PrecisionContext) -> "DenseMatrix":
        return cls.diag([1] * n, ctx)

    @classmethod
    def diag(cls, values, ctx: PrecisionContext) -> "DenseMatrix":
        n = len(values)
        zero = ctx.mpfr(0)
        arr = np.full((n, n), zero, dtype=object)
        for i, v in enumerate(values):
            arr[i, i] = ctx.mpfr(v)
        return cls(arr, ctx, check=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, idx):
        v = self.data[idx]
        if isinstance(v, np.ndarray):
            return v
        return BigScalar(v, self.ctx)

    def matvec(self, x: "DenseVector") -> "DenseVector":
        """``A @ x`` with ascending-column sequential summation per row."""
        same_context(self, x)
        if x.size != self.cols:
            raise ValueError(f"dimension mismatch: {self.shape} @ ({x.size},)")
        with self.ctx.local():
            out = [_seq_dot(row, x.data) for row in self.data]
        return DenseVector(np.array(out, dtype=object), self.ctx, check=False)

    def scaled(self, alpha) -> "DenseMatrix":
        a = _coerce(self.ctx, alpha)
        with self.ctx.local():
            arr = self.data * a
        return DenseMatrix(arr, self.ctx, check=False)

    def norm1(self) -> BigScalar:
        """Maximum absolute column sum."""
        with self.ctx.local():
            best = gmpy2.mpfr(0)
            for j in range(self.cols):
                s = gmpy2.mpfr(0)
                for v in self.data[:, j]:
                    s += abs(v)
                if s > best:
                    best = s
        return BigScalar(best, self.ctx)

    def norm_inf(self) -> BigScalar:
        """Maximum absolute row sum."""
        with self.ctx.local():
            best = gmpy2.mpfr(0)
            for row in self.data:
                s = gmpy2.mpfr(0)
                for v in row:
                    s += abs(v)
                if s > best:
                    best = s
        return BigScalar(best, self.ctx)

    def max_abs(self) -> BigScalar:
        return BigScalar(max(abs(v) for v in self.data.ravel()), self.ctx)

    def to_float(self) -> np.ndarray:
        return np.vectorize(float, otypes=[float])(self.data)

    def __repr__(self):
        return f"DenseMatrix({self.rows}x{self.cols}, digits={self.ctx.digits})"


class DenseVector:
    """Dense vector of ``mpfr`` entries sharing one context."""

    def __init__(self, data, ctx: PrecisionContext, *, check: bool = True):
        arr = _as_object_array(data, ctx, 1)
        if check:
            _check_entries(arr, ctx)
        arr.flags.writeable = False
        self.data = arr
        self.ctx = ctx

    @classmethod
    def zeros(cls, n: int, ctx: PrecisionContext) -> "DenseVector":
        return cls(np.full(n, ctx.mpfr(0), dtype=object), ctx, check=False)

    @property
    def size(self) -> int:
        return self.data.shape[0]

    def __len__(self):
        return self.size

    def __getitem__(self, i):
        v = self.data[i]
        if isinstance(v, np.ndarray):
            return v
        return BigScalar(v, self.ctx)

    def __iter__(self):
        return (BigScalar(v, self.ctx) for v in self.data)

    def inf_norm(self) -> BigScalar:
        return BigScalar(max((abs(v) for v in self.data), default=self.ctx.mpfr(0)), self.ctx)

    def norm1(self) -> BigScalar:
        with self.ctx.local():
            s = gmpy2.mpfr(0)
            for v in self.data:
                s += abs(v)
        return BigScalar(s, self.ctx)

    def to_decimal(self) -> list[str]:
        return [format_decimal(v, self.ctx.serial_digits) for v in self.data]

    @classmethod
    def from_decimal(cls, items: Iterable[str], ctx: PrecisionContext) -> "DenseVector":
        return cls(np.array([parse_decimal(s, ctx) for s in items], dtype=object), ctx, check=False)

    def __repr__(self):
        return f"DenseVector({self.size}, digits={self.ctx.digits})"


def same_context(*objs) -> PrecisionContext:
    ctx = objs[0].ctx
    for o in objs[1:]:
        if o.ctx != ctx:
            raise PrecisionMismatchError(
                f"cannot mix {ctx.digits}-digit and {o.ctx.digits}-digit operands")
    return ctx


def _seq_dot(a: np.ndarray, b: np.ndarray):
    # fixed ascending-index reduction; caller holds the precision context
    s = gmpy2.mpfr(0)
    for x, y in zip(a, b):
        s += x * y
    return s
