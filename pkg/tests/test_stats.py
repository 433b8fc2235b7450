import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import comb, gammainc

from bergkern import stats
from bergkern.errors import ValidationError
from bergkern.potentials import PotentialModel, RadialProfile
from bergkern.specfun import f_delta

G1 = PotentialModel.ginibre(1)
G2 = PotentialModel.ginibre(2)


def _setup(model, n, **kw):
    return stats.CountingSetup(model, n, **kw)


@pytest.mark.parametrize("a", [0.3, 0.9, 1.0, 1.2])
def test_ginibre_probabilities_incomplete_gamma(a):
    n = 200
    p, q = stats.ball_probabilities(_setup(G1, n, a=a))
    j = np.arange(n)
    np.testing.assert_allclose(p, gammainc(j + 1, n * a * a), rtol=1e-10, atol=1e-300)
    np.testing.assert_allclose(p + q, 1.0, rtol=1e-12)


def test_probability_single_matches_vector():
    s = _setup(G2, 50, a=0.95)
    p, _ = stats.ball_probabilities(s)
    assert stats.ball_probability(s, 37) == pytest.approx(p[37], rel=1e-12)
    with pytest.raises(ValidationError):
        stats.ball_probability(s, 50)


def test_radius_extremes():
    p0, q0 = stats.ball_probabilities(_setup(G1, 32, a=0.0))
    assert np.all(p0 == 0) and np.all(q0 == 1)
    p, _ = stats.ball_probabilities(_setup(G1, 32, a=50.0))
    assert np.all(p == 1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.6), st.floats(0.01, 0.3))
def test_probabilities_monotone_in_radius(a, da):
    p1, _ = stats.ball_probabilities(_setup(G2, 40, a=a))
    p2, _ = stats.ball_probabilities(_setup(G2, 40, a=a + da))
    assert np.all(p2 >= p1)
    assert np.all((p1 >= 0) & (p1 <= 1))


def test_single_bernoulli():
    a = 0.7
    r = stats.variance_bernoulli(_setup(G1, 1, a=a))
    p0 = -math.expm1(-a * a)
    assert r.mean == pytest.approx(p0, rel=1e-13)
    assert r.variance == pytest.approx(p0 * (1 - p0), rel=1e-13)


def test_large_radius_counts_everything():
    n, d = 30, 2
    r = stats.variance_bernoulli(_setup(G2, n, a=40.0))
    assert r.variance == 0.0
    assert r.mean == pytest.approx(comb(n + d - 1, d), rel=1e-12)


@pytest.mark.parametrize("model,n,kw", [
    (G2, 64, {"a": 0.8}),
    (G1, 256, {"a": 1.0}),
    (G2, 256, {"delta": 0.0}),
    (G1, 512, {"delta": -1.0}),
])
def test_integral_matches_bernoulli(model, n, kw):
    s = _setup(model, n, **kw)
    b = stats.variance_bernoulli(s)
    i = stats.variance_integral(s)
    assert i.variance == pytest.approx(b.variance, rel=0.01)
    assert i.mean == pytest.approx(b.mean, rel=0.01)


def test_integral_outside_everything_is_zero():
    r = stats.variance_integral(_setup(G1, 64, a=30.0))
    assert r.variance == pytest.approx(0.0, abs=1e-200)


def test_edge_limit_d1_formula():
    for delta in (-1.0, 0.0, 1.0, 2.5):
        assert stats.edge_variance_limit(G1, delta=delta) == pytest.approx(f_delta(delta) / math.sqrt(math.pi),
                                                                           rel=1e-14)


def test_edge_limit_d2_sphere():
    assert stats.edge_variance_limit(G2, delta=0.0) == pytest.approx(math.pi * 0.5 / math.sqrt(math.pi), rel=1e-14)
    ratio = stats.edge_variance_limit(G2, delta=0.3) / stats.edge_variance_limit(G2, delta=0.3, angular_factor="degree")
    assert ratio == pytest.approx(math.pi, rel=1e-14)


def test_edge_limit_tail_and_errors():
    assert stats.edge_variance_limit(G1, delta=12.0) < 1e-30
    with pytest.raises(ValidationError):
        stats.edge_variance_limit(G1, angular_factor="cube")
    raw = PotentialModel.radial(RadialProfile.polynomial([(2, 3.0)]), 1, normalize=False)
    with pytest.raises(ValidationError):
        stats.edge_variance_limit(raw)


@pytest.mark.parametrize("delta", [-1.0, 0.0, 1.0])
def test_variance_scaling_d1(delta):
    n = 4096
    r = stats.variance_bernoulli(_setup(G1, n, delta=delta))
    limit = stats.edge_variance_limit(G1, delta=delta)
    assert r.variance / math.sqrt(n) == pytest.approx(limit, rel=0.05)


def test_variance_scaling_d2_degree_reading_trend():
    # the monomial-count constant is approached from one side as n grows
    devs = []
    for n in (256, 1024):
        r = stats.variance_bernoulli(_setup(G2, n, delta=0.0))
        limit = stats.edge_variance_limit(G2, delta=0.0, angular_factor="degree")
        devs.append(abs(r.variance / (n * math.sqrt(n)) / limit - 1))
    assert devs[1] < devs[0] < 0.1


def test_mean_at_unit_radius():
    # every point sits in the closed unit ball in the limit; the deficit is the
    # Poisson sum sum_{j<n} P(Poisson(n) <= j) ~ sqrt(n / 2 pi) per degree
    n = 1024
    r = stats.variance_bernoulli(_setup(G1, n, a=1.0))
    assert (n - r.mean) / math.sqrt(n / (2 * math.pi)) == pytest.approx(1.0, rel=1e-3)
    n = 256
    r = stats.variance_bernoulli(_setup(G2, n, a=1.0))
    total = comb(n + 1, 2)
    assert 0.9 < r.mean / total < 1.0
    assert (total - r.mean) / (n * math.sqrt(n / (2 * math.pi))) == pytest.approx(1.0, rel=0.1)


def test_variance_in_delta():
    n = 1024
    deltas = np.linspace(-3, 3, 13)
    v = np.array([stats.variance_bernoulli(_setup(G1, n, delta=float(t))).variance for t in deltas])
    assert np.all(v > 0)
    tail = v[deltas >= 1]
    assert np.all(np.diff(tail) < 0)


def test_mc_matches_exact():
    s = _setup(G1, 64, a=0.9)
    exact = stats.variance_bernoulli(s)
    mc = stats.mc_count(s, 100_000, seed=11)
    assert abs(mc.mean - exact.mean) <= 4 * mc.diagnostics["stderr_mean"]
    assert abs(mc.variance - exact.variance) <= 4 * mc.diagnostics["stderr_variance"]
    assert not mc.diagnostics["insufficient_data"]


def test_mc_seed_and_threads():
    s = _setup(G2, 32, a=0.95)
    a = stats.mc_count(s, 20_000, seed=5)
    b = stats.mc_count(s, 20_000, seed=5)
    c = stats.mc_count(s, 20_000, seed=5, threads=4)
    d = stats.mc_count(s, 20_000, seed=6)
    assert a.to_dict() == b.to_dict() == c.to_dict()
    assert a.mean != d.mean


def test_mc_single_trial_flagged():
    r = stats.mc_count(_setup(G1, 8, a=1.0), 1)
    assert r.diagnostics["insufficient_data"]
    assert r.variance == 0.0 and math.isinf(r.diagnostics["stderr_variance"])
    with pytest.raises(ValidationError):
        stats.mc_count(_setup(G1, 8, a=1.0), 0)


def test_setup_validation():
    with pytest.raises(ValidationError):
        stats.CountingSetup(G1, 10)
    with pytest.raises(ValidationError):
        stats.CountingSetup(G1, 10, a=1.0, delta=0.0)
    with pytest.raises(ValidationError):
        stats.CountingSetup(G1, 0, a=1.0)
    with pytest.raises(ValidationError):
        stats.CountingSetup(G1, 10, a=-1.0)
    with pytest.raises(ValidationError):
        stats.CountingSetup(PotentialModel.tensor([RadialProfile.power(1.0)] * 2), 10, a=1.0)


def test_radius_from_delta():
    s = _setup(G2, 100, delta=2.0)
    # dQ(1) = 1 for Ginibre in this normalization
    assert s.radius == pytest.approx(1 + 2.0 / math.sqrt(200), rel=1e-14)


def test_multiplicities_large_n():
    s = _setup(PotentialModel.ginibre(4), 10_000, a=1.0)
    lm = s.log_multiplicities()
    assert np.all(np.isfinite(lm))
    assert math.exp(lm[5]) == pytest.approx(comb(8, 3), rel=1e-12)


def test_result_rejects_negative_variance():
    with pytest.raises(ValidationError):
        stats.VarianceResult(1.0, -1e-3, "x")
