"""Counting statistics for balls centred at the origin, radial models.

For a projection kernel the number of points in a rotation-invariant set
is a sum of independent Bernoulli variables, one per orthonormal monomial,
with success probability p_j = (mass of the j-th monomial inside the ball).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import quad
from .errors import ValidationError
from .lognum import logsumexp_rows
from .potentials import PotentialModel
from .specfun import f_delta

MC_MIN_TRIALS = 10_000
MC_CHUNK = 4096
ANNULUS_FACTOR = 10.0


@dataclass(frozen=True)
class CountingSetup:
    model: PotentialModel
    n: int
    a: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if not self.model.is_radial:
            raise ValidationError("counting statistics need a radial model")
        if int(self.n) < 1:
            raise ValidationError("n must be positive")
        if (self.a is None) == (self.delta is None):
            raise ValidationError("set exactly one of a and delta")
        if self.a is not None and self.a < 0:
            raise ValidationError("the radius a must be nonnegative")

    @property
    def d(self) -> int:
        return self.model.d

    @property
    def radius(self) -> float:
        """a itself, or a_n(delta) = 1 + delta / sqrt(2 n dQ(1))."""
        if self.a is not None:
            return float(self.a)
        lap = float(self.model.profile.laplacian(1.0))
        return 1.0 + self.delta / math.sqrt(2.0 * self.n * lap)

    def log_multiplicities(self) -> np.ndarray:
        """log binom(j + d - 1, d - 1), j < n: monomials of total degree j."""
        j = np.arange(self.n)
        return gammaln(j + self.d) - gammaln(j + 1.0) - gammaln(float(self.d))


@dataclass
class VarianceResult:
    mean: float
    variance: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variance < 0:
            raise ValidationError("variance must be nonnegative")

    def to_dict(self) -> dict:
        return {"mean": self.mean, "variance": self.variance, "method": self.method, **self.diagnostics}


def ball_probabilities(setup: CountingSetup):
    """(p_j, 1 - p_j) for j < n, each computed from its own integral."""
    a = setup.radius
    j = np.arange(setup.n)
    profile, n, d = setup.model.profile, setup.n, setup.d
    log_h = quad.radial_norms(profile, n, d, j)
    lower = quad.ball_integrals(profile, n, d, j, a)
    upper = quad.ball_integrals(profile, n, d, j, a, upper=True)
    return np.clip(np.exp(lower - log_h), 0, 1), np.clip(np.exp(upper - log_h), 0, 1)


def ball_probability(setup: CountingSetup, j: int) -> float:
    if not 0 <= j < setup.n:
        raise ValidationError("j must satisfy 0 <= j < n")
    profile, n, d = setup.model.profile, setup.n, setup.d
    lower = quad.ball_integrals(profile, n, d, [j], setup.radius)[0]
    return float(min(1.0, math.exp(lower - quad.radial_norms(profile, n, d, [j])[0])))


def variance_bernoulli(setup: CountingSetup) -> VarianceResult:
    """Exact mean and variance: sum over degrees of mult_j p_j and mult_j p_j (1 - p_j)."""
    p, q = ball_probabilities(setup)
    mult = np.exp(setup.log_multiplicities())
    return VarianceResult(
        float(np.sum(mult * p)),
        float(np.sum(mult * p * q)),
        "bernoulli_exact",
        {"radius": setup.radius, "count": float(mult.sum())},
    )


_GL16 = np.polynomial.legendre.leggauss(16)


def _panel_nodes(lo, hi, width):
    panels = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL16[0][None, :]).ravel()
    w = (half[:, None] * _GL16[1][None, :]).ravel()
    return x, w


def _log_radial_moments(profile, n, d, r, w, j):
    """log int r^{2j+2d-1} e^{-nV(r)} dr on the given nodes, for each j."""
    keep = r > 0
    r, w = r[keep], w[keep]
    base = np.log(w) - n * profile.V(r)
    log_r = np.log(r)
    out = np.empty(j.size)
    step = max(1, (1 << 21) // max(r.size, 1))
    for s in range(0, j.size, step):
        jj = j[s:s + step]
        vals = (2 * jj[:, None] + 2 * d - 1) * log_r[None, :] + base[None, :]
        out[s:s + step] = logsumexp_rows(vals)
    return out


def variance_integral(setup: CountingSetup, annulus_factor: float = ANNULUS_FACTOR) -> VarianceResult:
    """Variance as the double integral of |K_n(z, w)|^2 over {|z| <= a} x {|w| > a}.

    The angular integrals are done in closed form, which leaves
      (4 / Gamma(d)) sum_j int_{r<=a} int_{r'>a} (r r')^{2j+2d-1} e^{-n(V(r)+V(r'))}
                           / (j! Gamma(j+d) h_j^2) dr dr'.
    Both radial integrals are restricted to the annulus |r - a| <= 10 log n / sqrt n
    and evaluated with fixed Gauss-Legendre panels.
    """
    n, d, a = setup.n, setup.d, setup.radius
    profile = setup.model.profile
    j = np.arange(n)
    log_h = quad.radial_norms(profile, n, d, j)
    width = annulus_factor * math.log(max(n, 2)) / math.sqrt(n)
    step = 0.25 / math.sqrt(n)
    r_in, w_in = _panel_nodes(max(0.0, a - width), a, step)
    r_out, w_out = _panel_nodes(a, a + width, step)
    log_in = _log_radial_moments(profile, n, d, r_in, w_in, j)
    log_out = _log_radial_moments(profile, n, d, r_out, w_out, j)
    log_terms = (math.log(4.0) - gammaln(float(d)) + log_in + log_out
                 - gammaln(j + 1.0) - gammaln(j + float(d)) - 2.0 * log_h)
    variance = float(np.exp(logsumexp_rows(log_terms[None, :])[0]))
    # mean: integral of the diagonal over the full ball
    r_ball, w_ball = _panel_nodes(0.0, a, step) if a > 0 else (np.array([]), np.array([]))
    if r_ball.size:
        log_ball = _log_radial_moments(profile, n, d, r_ball, w_ball, j)
        log_mean = math.log(2.0) - gammaln(float(d)) + log_ball - gammaln(j + 1.0) - log_h
        mean = float(np.exp(logsumexp_rows(log_mean[None, :])[0]))
    else:
        mean = 0.0
    return VarianceResult(mean, variance, "annulus_integral",
                          {"radius": a, "annulus_half_width": width, "nodes": int(r_in.size + r_out.size)})


def edge_variance_limit(model: PotentialModel, d: int | None = None, delta: float = 0.0,
                        angular_factor: str = "sphere") -> float:
    """Limit of Var / (n^{d-1} sqrt n) for the ball of radius a_n(delta).

    ``sphere``: f(delta) / (2 pi sqrt pi) * sqrt(dQ(1)) * |S^{2d-1}|, the
    sphere-area constant. ``degree``: f(delta) sqrt(dQ(1)) / (sqrt(pi) Gamma(d)),
    which follows from counting monomials of each total degree.
    The two agree for d = 1.
    """
    if not model.is_radial:
        raise ValidationError("edge variance limit needs a radial model")
    d = model.d if d is None else int(d)
    if abs(float(model.profile.dV(1.0)) - 2.0) > 1e-10:
        raise ValidationError("model must be normalized so that V'(1) = 2")
    root = math.sqrt(float(model.profile.laplacian(1.0)))
    f = f_delta(delta)
    if angular_factor == "sphere":
        sphere = 2.0 * math.pi ** d / math.gamma(d)
        return f / (2.0 * math.pi * math.sqrt(math.pi)) * root * sphere
    if angular_factor == "degree":
        return f * root / (math.sqrt(math.pi) * math.gamma(d))
    raise ValidationError(f"unknown angular factor {angular_factor!r}")


def _mc_chunk(args):
    seed_seq, size, mult, p = args
    rng = np.random.Generator(np.random.Philox(seed_seq))
    return rng.binomial(mult[None, :], p[None, :], size=(size, p.size)).sum(axis=1)


def mc_count(setup: CountingSetup, trials: int, seed: int = 0, threads: int = 1) -> VarianceResult:
    """Monte Carlo counts: sum over degrees of Binomial(mult_j, p_j).

    Trials are split into fixed-size chunks, each with its own Philox stream
    spawned from ``seed``, so the output does not depend on ``threads``.
    """
    trials = int(trials)
    if trials < 1:
        raise ValidationError("trials must be positive")
    p, _ = ball_probabilities(setup)
    mult = np.rint(np.exp(setup.log_multiplicities())).astype(np.int64)
    sizes = [MC_CHUNK] * (trials // MC_CHUNK)
    if trials % MC_CHUNK:
        sizes.append(trials % MC_CHUNK)
    streams = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    jobs = [(s, size, mult, p) for s, size in zip(streams, sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_mc_chunk, jobs))
    else:
        parts = [_mc_chunk(job) for job in jobs]
    counts = np.concatenate(parts).astype(float)
    mean = float(counts.mean())
    if trials < 2:
        var, se_mean, se_var = 0.0, math.inf, math.inf
    else:
        var = float(counts.var(ddof=1))
        se_mean = math.sqrt(var / trials)
        m4 = float(np.mean((counts - mean) ** 4))
        se_var = math.sqrt(max(m4 - var ** 2 * (trials - 3) / (trials - 1), 0.0) / trials)
    return VarianceResult(mean, var, "monte_carlo", {
        "trials": trials,
        "seed": int(seed),
        "stderr_mean": se_mean,
        "stderr_variance": se_var,
        "insufficient_data": trials < MC_MIN_TRIALS,
    })
