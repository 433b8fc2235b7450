import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammainc, gammaln

from bergkern import quad
from bergkern.errors import ValidationError
from bergkern.potentials import PotentialModel, RadialProfile

GINIBRE = PotentialModel.ginibre(1).profile
ELLIPTIC = quad.PlanarPolynomial.from_dict({(2, 0): 0.8, (0, 2): 1.2})

# log |J_jk| for Q = 0.8x^2 + 1.2y^2 at n = 200, frozen from a 60-digit
# expansion into one-dimensional Gaussian moments (all phases are 0).
ELLIPTIC_LOG_MOMENTS = {
    (0, 0): -5.2779063692879091127,
    (2, 0): -12.144839653749791035,
    (1, 3): -16.303722737109462892,
    (5, 5): -26.593073049652229033,
    (12, 2): -38.390248895480093544,
    (10, 10): -42.04029767811726788,
    (20, 18): -63.96136430526305444,
}


@pytest.mark.parametrize("n", [16, 256, 4096])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_ginibre_norms(n, d):
    j = np.arange(2 * n + 1)
    got = quad.radial_norms(GINIBRE, n, d, j)
    assert np.max(np.abs(np.expm1(got + (j + d) * math.log(n)))) <= 1e-10


@pytest.mark.parametrize("b", [0.5, 1.5, 3.0])
def test_power_family_norms(b):
    # independent form of the substitution u = n r^{2b}/b, written out directly
    profile = PotentialModel.radial(RadialProfile.power(b), 1).profile
    n, d = 64, 2
    j = np.arange(0, 129, 7)
    m = j + d
    ref = gammaln(m / b) - gammaln(m) + (m / b) * math.log(b / n) - math.log(b)
    assert np.max(np.abs(np.expm1(quad.radial_norms(profile, n, d, j) - ref))) <= 1e-10
    assert np.allclose(quad.monomial_norms_closed_form(profile, n, d, j), ref, rtol=0, atol=1e-12)


def test_closed_form_needs_single_term():
    with pytest.raises(ValidationError):
        quad.monomial_norms_closed_form(RadialProfile.polynomial([(2, 1.0), (4, 1.0)]), 10, 1, [0])


def test_degree_guard():
    with pytest.raises(ValidationError):
        quad.radial_norms(GINIBRE, 4, 1, [42])


def test_ball_integral_examples():
    n = 50
    assert quad.ball_integral(GINIBRE, n, 1, 3, 0.0).is_zero
    for a in (0.3, 0.9, 1.2):
        for j in (0, 10, 49):
            ratio = math.exp(quad.ball_integral(GINIBRE, n, 1, j, a).log_value
                             - quad.radial_norm(GINIBRE, n, 1, j).log_value)
            assert ratio == pytest.approx(gammainc(j + 1, n * a * a), rel=1e-10, abs=1e-300)
    # far past the peak the ball integral is the full norm
    big = 1.0 + 12.0 / math.sqrt(2 * n)
    assert quad.ball_integral(GINIBRE, n, 1, 20, big).log_value == pytest.approx(
        quad.radial_norm(GINIBRE, n, 1, 20).log_value, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.integers(0, 60))
def test_ball_ratio_monotone(a1, a2, j):
    lo, hi = sorted((a1, a2))
    h = quad.radial_norms(GINIBRE, 40, 2, [j])[0]
    p_lo = math.exp(quad.ball_integrals(GINIBRE, 40, 2, [j], lo)[0] - h)
    p_hi = math.exp(quad.ball_integrals(GINIBRE, 40, 2, [j], hi)[0] - h)
    assert 0.0 <= p_lo <= p_hi * (1 + 1e-12) <= 1.0 + 1e-12


def test_lower_plus_upper_is_full():
    j = np.arange(0, 80, 3)
    for a in (0.5, 1.0, 1.3):
        lo = quad.ball_integrals(GINIBRE, 60, 2, j, a)
        up = quad.ball_integrals(GINIBRE, 60, 2, j, a, upper=True)
        full = quad.radial_norms(GINIBRE, 60, 2, j)
        assert np.allclose(np.logaddexp(lo, up), full, rtol=0, atol=1e-12)


def test_norm_table_cached():
    t1 = quad.norm_table(GINIBRE, 32, 2)
    t2 = quad.norm_table(GINIBRE, 32, 2)
    assert t1 is t2
    assert len(t1) == 34  # h_0 .. h_{n+d-1}
    assert t1[0].log_value == pytest.approx(-2 * math.log(32), rel=1e-12)


def test_ginibre_moments():
    Q = quad.PlanarPolynomial.from_dict({(2, 0): 1.0, (0, 2): 1.0})
    n = 30
    for j in range(6):
        got = quad.planar_moment(Q, n, j, j)
        assert got.log_modulus == pytest.approx(math.lgamma(j + 1) - (j + 1) * math.log(n), rel=1e-12)
        for k in range(6):
            if k != j:
                assert quad.planar_moment(Q, n, j, k).is_zero


def test_elliptic_moments_frozen():
    for (j, k), ref in ELLIPTIC_LOG_MOMENTS.items():
        got = quad.planar_moment(ELLIPTIC, 200, j, k)
        assert got.log_modulus == pytest.approx(ref, rel=1e-12)
        assert abs(math.sin(got.phase)) < 1e-12


def test_elliptic_parity_and_symmetry():
    log_mod, phase = quad.moment_matrix(ELLIPTIC, 200, 12)
    for j in range(13):
        for k in range(13):
            if (j - k) % 2:
                assert log_mod[j, k] == -np.inf
            else:
                assert log_mod[j, k] == pytest.approx(log_mod[k, j], rel=1e-10)
                assert math.cos(phase[j, k] + phase[k, j]) == pytest.approx(1.0, abs=1e-10)
    # the lower decay bound only as nonvanishing
    assert all(np.isfinite(log_mod[j, j + 2]) for j in range(11))


def test_planar_polynomial_validation():
    with pytest.raises(ValidationError):
        quad.PlanarPolynomial.from_dict({(2, 0): 1.0, (0, 2): -1.0}).validate()
    with pytest.raises(ValidationError):
        quad.PlanarPolynomial.from_dict({(2, 0): 1.0, (0, 2): 1.0, (3, 0): 1.0}).validate()
    assert ELLIPTIC.validate() is ELLIPTIC
    assert ELLIPTIC.laplacian_at_zero() == pytest.approx(1.0)


def test_moment_cap():
    with pytest.raises(ValidationError):
        quad.planar_moment(ELLIPTIC, 200, 65, 0)
