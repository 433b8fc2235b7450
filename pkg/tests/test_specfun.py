import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from bergkern import specfun
from bergkern.errors import DomainError, ValidationError, WindowError

# Frozen from a 40-digit mpmath evaluation (regularized gamma, quadrature of
# the erfc integral along a horizontal ray, quadrature of the f integrand).
P_5_5 = 0.5595067149347875885574
ERFC_1 = 0.1572992070502851306588
ERFC_1_PLUS_I = complex(-0.3161512816979476448803, -0.1904534692378346862841)
F_ONE = 0.0603220105251094131186


def test_log_gamma_values():
    assert specfun.log_gamma(1) == 0.0
    assert specfun.log_gamma(2) == 0.0
    assert specfun.log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-15)


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_log_gamma_domain(x):
    with pytest.raises(DomainError):
        specfun.log_gamma(x)


def test_inc_gamma_examples():
    for x in (0.1, 1.0, 7.5):
        assert specfun.reg_inc_gamma_lower(1, x) == pytest.approx(-math.expm1(-x), rel=1e-14)
    assert specfun.reg_inc_gamma_lower(3.0, 0.0) == 0.0
    assert specfun.reg_inc_gamma_lower(5, 5) == pytest.approx(P_5_5, rel=1e-13)


@pytest.mark.parametrize("s", [0.5, 3.0, 40.0, 1000.0])
def test_inc_gamma_matches_scipy(s):
    x = np.linspace(0.01, 3 * s + 10, 37)
    for xi in x:
        p = specfun.reg_inc_gamma_lower(s, xi)
        q = specfun.reg_inc_gamma_upper(s, xi)
        assert p == pytest.approx(special.gammainc(s, xi), rel=1e-11, abs=1e-300)
        assert q == pytest.approx(special.gammaincc(s, xi), rel=1e-11, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 200), st.floats(0, 400), st.floats(0, 400))
def test_inc_gamma_monotone(s, x1, x2):
    lo, hi = sorted((x1, x2))
    assert specfun.reg_inc_gamma_lower(s, lo) <= specfun.reg_inc_gamma_lower(s, hi)


def test_erfc_real_examples():
    assert specfun.erfc_real(0.0) == 1.0
    assert specfun.erfc_real(30.0) < 1e-300
    assert specfun.erfc_real(1.0) == pytest.approx(ERFC_1, rel=1e-15)


def test_erfc_reflection():
    rng = np.random.default_rng(1)
    for x in rng.uniform(-10, 10, 1000):
        assert abs(specfun.erfc_real(x) + specfun.erfc_real(-x) - 2) <= 1e-13


def test_erfc_complex_examples():
    assert specfun.erfc_complex(0).to_complex() == 1.0
    z = 0.7 - 1.3j
    total = specfun.erfc_complex(z).to_complex() + specfun.erfc_complex(-z).to_complex()
    assert abs(total - 2) < 1e-13
    got = specfun.erfc_complex(1 + 1j).to_complex()
    assert abs(got - ERFC_1_PLUS_I) < 1e-14


def test_erfc_complex_on_reals():
    x = np.linspace(-8, 8, 321)
    got = specfun.erfc_complex_array(x + 0j)
    assert np.max(np.abs(got - special.erfc(x))) <= 1e-12


def test_erfc_complex_matches_wofz():
    rng = np.random.default_rng(2)
    z = rng.uniform(-6, 6, 400) + 1j * rng.uniform(-6, 6, 400)
    ref = special.erfc(z)
    got = specfun.erfc_complex_array(z)
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-12


def test_log_erfc_far_field():
    # deep in the right half-plane erfc underflows but its log does not
    z = np.array([40.0 + 3j, 25.0 - 10j])
    lm, ph = specfun.log_erfc_array(z)
    ref = np.log(special.erfcx(z)) - z ** 2
    assert np.allclose(lm, ref.real, rtol=1e-13)
    assert np.allclose(np.angle(np.exp(1j * (ph - ref.imag))), 0, atol=1e-10)


def test_erfc_window():
    with pytest.raises(WindowError):
        specfun.log_erfc_array(np.array([60.0 + 0j]))


def test_complex_value_rejects_nan():
    with pytest.raises(ValidationError):
        specfun.ComplexValue(float("nan"), 0.0)


def test_f_delta_examples():
    assert specfun.f_delta(20.0) < 1e-12
    assert specfun.f_delta(-1.0) > specfun.f_delta(0.0) > specfun.f_delta(1.0)
    assert specfun.f_delta(1.0) == pytest.approx(F_ONE, rel=1e-11)


def test_f_delta_refinement():
    for delta in (-2.0, 0.0, 0.5, 3.0):
        assert abs(specfun.f_delta(delta, step=0.25) - specfun.f_delta(delta, step=0.125)) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4))
def test_f_delta_reflection(delta):
    # erfc(t) erfc(-t) is even and integrates to 4/sqrt(2 pi) over the line
    assert specfun.f_delta(delta) + specfun.f_delta(-delta) == pytest.approx(1.0, abs=1e-12)


def test_halfspace_examples():
    assert specfun.halfspace_gaussian(np.eye(2), [1, 0], [0, 0]) == pytest.approx(math.pi, rel=1e-14)
    A = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, -0.2], [0.1, -0.2, 1.5]])
    v, b = np.array([0.3, -1.0, 0.4]), np.array([0.2, 0.1, -0.5])
    assert specfun.halfspace_gaussian(A, 2 * v, b) == pytest.approx(specfun.halfspace_gaussian(A, v, b), rel=1e-14)


def test_halfspace_matches_monte_carlo():
    rng = np.random.default_rng(7)
    M = rng.standard_normal((3, 3))
    A = M @ M.T + np.eye(3)
    v, b = rng.standard_normal(3), 0.3 * rng.standard_normal(3)
    est, se = specfun.halfspace_gaussian_mc(A, v, b, 200_000, seed=1)
    assert abs(est - specfun.halfspace_gaussian(A, v, b)) <= 4 * se


def _spd(seed, dim):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((dim, dim))
    return M @ M.T + 0.1 * np.eye(dim), rng.standard_normal(dim)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 5))
def test_halfspace_zero_b_is_half(seed, dim):
    A, v = _spd(seed, dim)
    full = math.sqrt(np.linalg.det(2 * math.pi * A))
    assert specfun.halfspace_gaussian(A, v, np.zeros(dim)) == pytest.approx(full / 2, rel=1e-12)


def test_halfspace_rejects_non_spd():
    with pytest.raises(ValidationError):
        specfun.halfspace_gaussian([[1.0, 2.0], [2.0, 1.0]], [1, 0], [0, 0])
    with pytest.raises(ValidationError):
        specfun.halfspace_gaussian(np.eye(2), [0, 0], [0, 0])
