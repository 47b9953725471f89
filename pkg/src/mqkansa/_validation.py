"""Input checking and parsing shared by the estimators, the solver and the CLI."""
from __future__ import annotations

import re
from fractions import Fraction
from numbers import Integral, Rational

import gmpy2

from .precision import BigScalar, PrecisionContext, parse_decimal

_NUMBER = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_FACTOR_RE = re.compile(rf"^(?:(?P<num>{_NUMBER})|sqrt\((?P<root>{_NUMBER})\)|sqrt(?P<bare>\d+))$")


def as_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float.

    Floats are converted through their shortest repr so ``0.05`` becomes
    ``1/20`` rather than the binary value nearest to it.
    """
    if isinstance(value, bool):
        raise TypeError("expected a number, got a bool")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (Integral, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise ValueError(f"not an exact number: {value!r}") from None
    raise TypeError(f"expected a number, got {type(value).__name__}")


def parse_shape(value, ctx: PrecisionContext) -> BigScalar:
    """Shape parameter from a number or a product expression.

    Strings may be a decimal literal or a ``*``-separated product of decimal
    literals and ``sqrt(x)`` factors, e.g. ``"800*sqrt(2)*1e14"``.  Every
    factor is rounded once at the context's precision.
    """
    if isinstance(value, BigScalar):
        if value.ctx != ctx:
            return BigScalar(value.value, ctx)
        return value
    if isinstance(value, str):
        text = value.replace(" ", "")
        if not text:
            raise ValueError("empty shape parameter")
        with ctx.local():
            acc = gmpy2.mpfr(1)
            for part in text.split("*"):
                m = _FACTOR_RE.match(part)
                if m is None:
                    raise ValueError(f"cannot parse shape parameter {value!r} (factor {part!r})")
                if m.group("num") is not None:
                    f = parse_decimal(m.group("num"), ctx)
                else:
                    f = gmpy2.sqrt(parse_decimal(m.group("root") or m.group("bare"), ctx))
                acc = acc * f
        out = BigScalar(acc, ctx)
    else:
        out = ctx.scalar(as_fraction(value) if not isinstance(value, type(gmpy2.mpfr(0))) else value)
    if not out.value > 0 or gmpy2.is_infinite(out.value):
        raise ValueError(f"shape parameter must be positive and finite, got {value!r}")
    return out


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_points(points, dim: int, name: str = "points") -> list[tuple]:
    """Points as tuples of Fractions, each with ``dim`` coordinates."""
    out = []
    for i, p in enumerate(points):
        p = (p,) if not isinstance(p, (tuple, list)) else p
        if len(p) != dim:
            raise ValueError(f"{name}[{i}] has {len(p)} coordinates, expected {dim}")
        out.append(tuple(as_fraction(x) for x in p))
    return out
