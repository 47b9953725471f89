"""Generalized multiquadrics ``(-1)**ceil(beta/2) * (c**2 + |x|**2)**(beta/2)``.

Values and Laplacians are exact closed forms evaluated in the kernel's
precision context.  Laplacian forms live in a small registry keyed by
``(beta, dim)`` so special cases can be added without touching the solver.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Sequence

import gmpy2

from .precision import BigScalar, PrecisionContext

SUPPORTED_DIMS = (1, 2)


class UnsupportedBetaError(ValueError):
    """No Laplacian closed form is registered for a (beta, dim) pair."""


def _exact_beta(beta) -> Fraction:
    if isinstance(beta, bool):
        raise TypeError("beta must be a real number")
    if isinstance(beta, str):
        return Fraction(beta)
    return Fraction(beta)


def sign_factor(beta) -> int:
    """``(-1)**ceil(beta/2)`` using the ordinary ceiling (also for negative beta)."""
    return -1 if math.ceil(_exact_beta(beta) / 2) % 2 else 1


# (t = c**2 + r**2, r2, c2, value, beta, dim, sign) -> Laplacian
LaplacianForm = Callable[..., "gmpy2.mpfr"]

_LAPLACIANS: dict[tuple[Fraction | None, int], LaplacianForm] = {}


def register_laplacian(beta, dim: int, form: LaplacianForm) -> None:
    """Register a Laplacian closed form; ``beta=None`` registers a family form."""
    key = (None if beta is None else _exact_beta(beta), dim)
    _LAPLACIANS[key] = form


def _lookup(beta: Fraction, dim: int) -> LaplacianForm:
    form = _LAPLACIANS.get((beta, dim)) or _LAPLACIANS.get((None, dim))
    if form is None:
        raise UnsupportedBetaError(f"no Laplacian registered for beta={beta}, dim={dim}")
    return form


def _inverse_mq_laplacian(t, r2, c2, value, beta, dim, sign):
    # beta = -1: (2x^2 - c^2) t^-5/2 in 1D, (r^2 - 2c^2) t^-5/2 in 2D
    if dim == 1:
        return (2 * r2 - c2) * value / (t * t)
    return (r2 - 2 * c2) * value / (t * t)


def _general_laplacian(t, r2, c2, value, beta, dim, sign):
    # Laplacian of s t^(b/2) with t = c^2 + r^2:  s b t^(b/2-2) (dim t + (b-2) r^2)
    b = gmpy2.mpfr(beta.numerator) / beta.denominator
    return b * value * (dim * t + (b - 2) * r2) / (t * t)


register_laplacian(-1, 1, _inverse_mq_laplacian)
register_laplacian(-1, 2, _inverse_mq_laplacian)
register_laplacian(None, 1, _general_laplacian)
register_laplacian(None, 2, _general_laplacian)


class MultiquadricKernel:
    """Radial kernel ``phi(x) = s (c**2 + |x|**2)**(beta/2)`` on R**dim.

    Parameters
    ----------
    beta : real, not an even non-negative integer
    c : shape parameter, > 0; anything :meth:`PrecisionContext.mpfr` accepts
    dim : 1 or 2
    ctx : precision context of every value produced
    """

    def __init__(self, beta, c, dim: int, ctx: PrecisionContext):
        b = _exact_beta(beta)
        if b >= 0 and b.denominator == 1 and b.numerator % 2 == 0:
            raise ValueError(f"beta must not be an even non-negative integer, got {beta}")
        if dim not in SUPPORTED_DIMS:
            raise ValueError(f"dim must be one of {SUPPORTED_DIMS}, got {dim}")
        cval = ctx.mpfr(c)
        if not cval > 0:
            raise ValueError(f"shape parameter c must be positive, got {c}")
        self.beta = b
        self.dim = dim
        self.ctx = ctx
        self.sign = sign_factor(b)
        self._c = cval
        with ctx.local():
            self._c2 = cval * cval
        self._form = _lookup(b, dim)
        with ctx.local():
            self._beta = gmpy2.mpfr(b.numerator) / b.denominator

    @property
    def c(self) -> BigScalar:
        return BigScalar(self._c, self.ctx)

    def params(self) -> dict:
        return {"beta": str(self.beta), "c": self.c.to_decimal(), "dim": self.dim,
                "digits": self.ctx.digits}

    # fast paths on squared distances; caller holds ctx.local()
    def value_r2(self, r2):
        t = self._c2 + r2
        if self.beta == -1:
            return 1 / gmpy2.sqrt(t)
        v = t ** (self._beta / 2)
        return v if self.sign > 0 else -v

    def both_r2(self, r2):
        """(value, Laplacian) at squared distance ``r2``."""
        t = self._c2 + r2
        if self.beta == -1:
            v = 1 / gmpy2.sqrt(t)
        else:
            v = t ** (self._beta / 2)
            if self.sign < 0:
                v = -v
        return v, self._form(t, r2, self._c2, v, self.beta, self.dim, self.sign)

    def _r2(self, diff: Sequence) -> "gmpy2.mpfr":
        if len(diff) != self.dim:
            raise ValueError(f"offset has {len(diff)} components, kernel dim is {self.dim}")
        r2 = gmpy2.mpfr(0)
        for d in diff:
            d = self.ctx.mpfr(d) if not isinstance(d, type(r2)) else d
            r2 += d * d
        return r2

    def value(self, diff: Sequence) -> BigScalar:
        """``phi(diff)``."""
        with self.ctx.local():
            return BigScalar(self.value_r2(self._r2(diff)), self.ctx)

    def laplacian(self, diff: Sequence) -> BigScalar:
        """Exact Laplacian of ``phi`` at ``diff``."""
        with self.ctx.local():
            return BigScalar(self.both_r2(self._r2(diff))[1], self.ctx)

    def __repr__(self):
        return (f"MultiquadricKernel(beta={self.beta}, c={float(self._c):.6g}, "
                f"dim={self.dim}, digits={self.ctx.digits})")
