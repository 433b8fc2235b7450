import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergkern.lognum import LogComplex, LogReal, log_sum_complex, logsumexp_rows, wrap_phase

finite = st.floats(-1e6, 1e6).filter(lambda x: abs(x) > 1e-6)


@given(finite, finite)
def test_logreal_arithmetic_matches_floats(a, b):
    x, y = LogReal.from_float(a), LogReal.from_float(b)
    assert (x * y).value() == pytest.approx(a * b, rel=1e-12)
    assert (x / y).value() == pytest.approx(a / b, rel=1e-12)
    assert (x + y).value() == pytest.approx(a + b, rel=1e-10, abs=1e-9 * max(abs(a), abs(b)))


def test_logreal_beyond_double_range():
    big = LogReal(5000.0)
    assert (big * big).log_value == 10000.0
    assert (big / big).value() == 1.0
    assert (big - big).is_zero


def test_logreal_zero():
    z = LogReal.zero()
    assert z.value() == 0.0
    assert (z + LogReal.from_float(2.0)).value() == pytest.approx(2.0)


@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3), st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3))
def test_logcomplex_mul_and_conj(a, b):
    x, y = LogComplex.from_complex(a), LogComplex.from_complex(b)
    assert abs((x * y).to_complex() - a * b) <= 1e-12 * abs(a * b)
    assert abs(x.conj().to_complex() - a.conjugate()) <= 1e-12 * abs(a)
    assert -math.pi < (x * y).phase <= math.pi


@given(st.floats(-100, 100))
def test_wrap_phase_range(t):
    w = float(wrap_phase(t))
    assert -math.pi < w <= math.pi
    assert cmath.isclose(cmath.exp(1j * w), cmath.exp(1j * t), abs_tol=1e-12)


def test_phase_coherent_sum_cancellation():
    # terms that nearly cancel: only the residual survives
    lm = np.log([1.0, 1.0, 1e-8])
    ph = np.array([0.0, math.pi, 0.5])
    out = log_sum_complex(lm, ph)
    assert out.to_complex() == pytest.approx(1e-8 * cmath.exp(0.5j), rel=1e-7)


def test_sum_of_many_terms():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, 10 ** 6)
    lm = np.log(x) + 800.0
    total = log_sum_complex(lm, np.zeros_like(lm))
    assert total.log_modulus == pytest.approx(800.0 + math.log(x.sum()), rel=1e-12)


def test_logsumexp_rows_all_minus_inf():
    out = logsumexp_rows(np.array([[-np.inf, -np.inf], [0.0, 0.0]]))
    assert out[0] == -np.inf
    assert out[1] == pytest.approx(math.log(2))
