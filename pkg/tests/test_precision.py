import math
from fractions import Fraction

import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mqkansa.precision import (BigScalar, DenseMatrix, DenseVector, PrecisionContext,
                               PrecisionMismatchError, format_decimal, log10_abs, parse_decimal)


def test_context_rejects_low_precision():
    with pytest.raises(ValueError):
        PrecisionContext(49)
    with pytest.raises(TypeError):
        PrecisionContext(100.0)
    assert PrecisionContext(50).bits == math.ceil(50 * math.log2(10))


def test_scalars_carry_context_precision():
    ctx = PrecisionContext(120)
    x = ctx.scalar("0.1")
    assert x.value.precision == ctx.bits
    assert (x * 3).value.precision == ctx.bits


def test_decimal_strings_are_parsed_exactly():
    ctx = PrecisionContext(100)
    x = ctx.mpfr("0.05")
    with ctx.local():
        assert abs(x * 20 - 1) < gmpy2.mpfr("1e-99")
    assert ctx.mpfr(Fraction(1, 20)) == x


def test_mixing_contexts_is_rejected():
    a = PrecisionContext(60).scalar(1)
    b = PrecisionContext(70).scalar(1)
    with pytest.raises(PrecisionMismatchError):
        a + b
    with pytest.raises(PrecisionMismatchError):
        a < b


def test_log10_far_outside_double_range():
    ctx = PrecisionContext(100)
    x = ctx.scalar("3.6e-1480")
    assert x.log10() == pytest.approx(math.log10(3.6) - 1480, abs=1e-9)
    assert log10_abs(ctx.mpfr(0)) == -math.inf


def test_format_decimal_layout():
    ctx = PrecisionContext(50)
    assert format_decimal(ctx.mpfr("-1234.5"), 5) == "-1.2345e+3"
    assert format_decimal(ctx.mpfr("7.2e-158"), 2) == "7.2e-158"
    assert format_decimal(ctx.mpfr(0), 3) == "0.00e+0"


@settings(max_examples=200, deadline=None)
@given(mant=st.integers(min_value=-10**60, max_value=10**60),
       exp=st.integers(min_value=-3000, max_value=3000),
       digits=st.sampled_from([50, 101, 800]))
def test_decimal_round_trip_is_exact(mant, exp, digits):
    ctx = PrecisionContext(digits)
    with ctx.local():
        x = gmpy2.mpfr(mant) * gmpy2.mpfr(10) ** exp
    s = BigScalar(x, ctx)
    back = BigScalar.from_decimal(s.to_decimal(), ctx)
    assert back.value == s.value


def test_parse_decimal_rejects_garbage():
    ctx = PrecisionContext(50)
    for bad in ("1e", "abc", "1.2.3", ""):
        with pytest.raises(ValueError):
            parse_decimal(bad, ctx)


def test_dense_containers():
    ctx = PrecisionContext(60)
    m = DenseMatrix.from_rows([[1, -2], [3, 4]], ctx)
    assert m.shape == (2, 2)
    assert m.norm1() == 6 and m.norm_inf() == 7
    v = DenseVector([1, 1], ctx)
    assert [float(x) for x in m.matvec(v)] == [-1.0, 7.0]
    with pytest.raises(ValueError):
        m.data[0, 0] = 1  # read-only storage
    other = DenseVector([1, 2], PrecisionContext(61))
    with pytest.raises(PrecisionMismatchError):
        m.matvec(other)


def test_vector_decimal_round_trip():
    ctx = PrecisionContext(80)
    v = DenseVector([Fraction(1, 3), Fraction(-2, 7), 0], ctx)
    w = DenseVector.from_decimal(v.to_decimal(), ctx)
    assert all(a == b for a, b in zip(v, w))
