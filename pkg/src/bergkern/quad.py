"""Log-domain quadrature for radial norms h_j, incomplete ball integrals
and planar moment matrices <z^j, z^k>.

The radial integrands r^{2d-1+2j} e^{-n V(r)} are unimodal and
Laplace-type: we locate the peak, bracket the region where the integrand
is within e^{-46} of its peak, and integrate with batched adaptive
Gauss-Kronrod in the log domain.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import _gk
from .errors import NumericError, ValidationError
from .lognum import LogComplex, LogReal
from .potentials import RadialProfile

__all__ = [
    "LogReal", "NormTable", "radial_norm", "radial_norms", "norm_table", "ball_integral",
    "ball_integrals", "PlanarPolynomial", "planar_moment", "moment_matrix",
]

DROP = 46.0  # e^{-46} ~ 1e-20 of the peak: discarded tails are below 1e-18
RTOL = 1e-13
MAX_DEGREE_FACTOR = 10
_STEPS = np.concatenate([[0.25, 0.5, 1.0, 1.5], 2.0 ** np.arange(1, 16, 0.5)])


def _log_integrand(profile, n, d, j):
    k = 2 * d - 1 + 2 * np.asarray(j, dtype=float)

    def logf(r, ids=None):
        kk = k if ids is None else k[ids][:, None]
        with np.errstate(divide="ignore"):
            return kk * np.log(r) - n * profile.V(r)

    return logf


def _peaks(profile: RadialProfile, n: int, d: int, j):
    """Peak r* solving r V'(r) = (2d-1+2j)/n, and a width from the curvature."""
    k = 2 * d - 1 + 2 * np.asarray(j, dtype=float)
    target = k / n
    if profile.kind == "power":
        peak = (target / (2 * profile.scale)) ** (1 / (2 * profile.b))
    else:
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        while True:
            short = profile.rdV(hi) < target
            if not short.any():
                break
            hi = np.where(short, 2 * hi, hi)
            if hi.max() > 1e150:
                raise NumericError("peak bracket failed")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = profile.rdV(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 4e-16 * hi):
                break
        peak = 0.5 * (lo + hi)
    curv = k / peak ** 2 + n * profile.d2V(peak)
    width = 1.0 / np.sqrt(np.maximum(curv, k / peak ** 2))
    return peak, width


def _reach(logf, anchor, width, direction, floor=0.0):
    """First anchor + direction*m*width where logf dropped DROP below logf(anchor)."""
    base = logf(anchor[:, None], np.arange(anchor.size))[:, 0]
    pts = anchor[:, None] + direction * _STEPS[None, :] * width[:, None]
    if direction < 0:
        pts = np.maximum(pts, floor)
    vals = logf(pts, np.arange(anchor.size))
    hit = (base[:, None] - vals > DROP) | (pts <= floor)
    first = np.where(hit.any(axis=1), hit.argmax(axis=1), _STEPS.size - 1)
    out = pts[np.arange(anchor.size), first]
    if direction > 0 and not hit.any(axis=1).all():
        raise NumericError("integrand tail did not decay within the search range")
    return out


def _subset(logf, selected):
    return lambda r, ids: logf(r, selected[ids])


def _check_degrees(n, d, j):
    j = np.atleast_1d(np.asarray(j, dtype=int))
    if n < 1 or d < 1:
        raise ValidationError("n and d must be positive")
    if j.size and (j.min() < 0 or j.max() > MAX_DEGREE_FACTOR * n + d):
        raise ValidationError(f"degree j must lie in [0, {MAX_DEGREE_FACTOR}*n]")
    return j


def _log_full_integrals(profile, n, d, j):
    logf = _log_integrand(profile, n, d, j)
    peak, width = _peaks(profile, n, d, j)
    lo = _reach(logf, peak, width, -1.0)
    hi = _reach(logf, peak, width, +1.0)
    total, _ = _gk.batch_log_integrate(logf, lo, hi, rtol=RTOL)
    return total


def radial_norms(profile: RadialProfile, n: int, d: int, j) -> np.ndarray:
    """log h_j for an array of degrees j."""
    j = _check_degrees(n, d, j)
    log_i = _log_full_integrals(profile, n, d, j)
    return math.log(2.0) - gammaln(j + d) + log_i


def radial_norm(profile: RadialProfile, n: int, d: int, j: int) -> LogReal:
    """h_j = 2/Gamma(j+d) int_0^inf r^{2d-1+2j} e^{-nV(r)} dr."""
    return LogReal(float(radial_norms(profile, n, d, [j])[0]), 1)


def _log_partial_integrals(profile, n, d, j, a, upper):
    """log int over [0, a] (upper=False) or [a, inf) (upper=True), per degree."""
    logf = _log_integrand(profile, n, d, j)
    peak, width = _peaks(profile, n, d, j)
    lo = _reach(logf, peak, width, -1.0)
    hi = _reach(logf, peak, width, +1.0)
    a_arr = np.full(j.shape, float(a))
    ids = np.arange(j.size)
    if not upper:
        if a <= 0:
            return np.full(j.shape, -np.inf)
        start, stop = lo.copy(), np.minimum(a_arr, hi)
        beyond = a_arr < peak
        if beyond.any():
            sub = _subset(logf, ids[beyond])
            start[beyond] = np.minimum(_reach(sub, a_arr[beyond], width[beyond], -1.0), a_arr[beyond])
    else:
        if math.isinf(a):
            return np.full(j.shape, -np.inf)
        start, stop = np.maximum(a_arr, lo), hi.copy()
        beyond = a_arr > peak
        if beyond.any():
            sub = _subset(logf, ids[beyond])
            stop[beyond] = np.maximum(_reach(sub, a_arr[beyond], width[beyond], +1.0), a_arr[beyond])
    total, _ = _gk.batch_log_integrate(logf, start, stop, rtol=RTOL)
    return total


def ball_integrals(profile: RadialProfile, n: int, d: int, j, a: float, upper: bool = False) -> np.ndarray:
    """Log of 2/Gamma(j+d) times the integral over [0, a] (or [a, inf) if ``upper``)."""
    j = _check_degrees(n, d, j)
    if a < 0:
        raise ValidationError("ball radius must be nonnegative")
    return math.log(2.0) - gammaln(j + d) + _log_partial_integrals(profile, n, d, j, float(a), upper)


def ball_integral(profile: RadialProfile, n: int, d: int, j: int, a: float, upper: bool = False) -> LogReal:
    """(2/Gamma(j+d)) int_0^a r^{2d-1+2j} e^{-nV(r)} dr."""
    value = float(ball_integrals(profile, n, d, [j], a, upper)[0])
    if value == -math.inf:
        return LogReal.zero()
    return LogReal(value, 1)


@dataclass(frozen=True)
class NormTable:
    n: int
    d: int
    profile: RadialProfile
    log_values: np.ndarray

    def __len__(self):
        return self.log_values.size

    def __getitem__(self, j) -> LogReal:
        return LogReal(float(self.log_values[j]), 1)

    @property
    def values(self):
        return [self[j] for j in range(len(self))]


@functools.lru_cache(maxsize=64)
def _cached_table(key: str, n: int, d: int, count: int):
    profile = RadialProfile.from_config(json.loads(key))
    log_values = radial_norms(profile, n, d, np.arange(count))
    log_values.setflags(write=False)
    return NormTable(n, d, profile, log_values)


def norm_table(profile: RadialProfile, n: int, d: int, count: int | None = None) -> NormTable:
    """h_0 .. h_{count-1} (default count n + d), cached per (profile, n, d)."""
    count = n + d if count is None else int(count)
    key = json.dumps(profile.to_dict(), sort_keys=True)
    return _cached_table(key, int(n), int(d), count)


# -- planar moments ---------------------------------------------------------

MOMENT_DEGREE_CAP = 64


@dataclass(frozen=True)
class PlanarPolynomial:
    """Q(z) = sum c_{pq} x^p y^q with z = x + iy."""

    terms: tuple

    def __post_init__(self):
        merged = {}
        for (p, q), c in self.terms:
            p, q, c = int(p), int(q), float(c)
            if p < 0 or q < 0 or not math.isfinite(c):
                raise ValidationError("planar polynomial terms need nonnegative powers and finite coefficients")
            if c != 0.0:
                merged[(p, q)] = merged.get((p, q), 0.0) + c
        if not merged:
            raise ValidationError("planar polynomial is identically zero")
        object.__setattr__(self, "terms", tuple(sorted(merged.items())))

    @classmethod
    def from_dict(cls, coeffs: dict) -> "PlanarPolynomial":
        return cls(tuple(coeffs.items()))

    @classmethod
    def from_radial(cls, profile: RadialProfile) -> "PlanarPolynomial":
        """Expand V(|z|) = sum c_k (x^2 + y^2)^k."""
        if profile.kind != "polynomial":
            raise ValidationError("only polynomial profiles expand into planar polynomials")
        out = {}
        for e, c in profile.terms:
            k = e // 2
            for i in range(k + 1):
                key = (2 * i, 2 * (k - i))
                out[key] = out.get(key, 0.0) + profile.scale * c * math.comb(k, i)
        return cls.from_dict(out)

    @classmethod
    def from_config(cls, spec) -> "PlanarPolynomial":
        try:
            return cls(tuple(((t["px"], t["py"]), t["coefficient"]) for t in spec))
        except (TypeError, KeyError) as exc:
            raise ValidationError(f"malformed planar polynomial: {spec!r}") from exc

    def to_config(self):
        return [{"px": p, "py": q, "coefficient": c} for (p, q), c in self.terms]

    @property
    def degree(self) -> int:
        return max(p + q for (p, q), _ in self.terms)

    def coefficient(self, p, q) -> float:
        return dict(self.terms).get((p, q), 0.0)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return sum(c * x ** p * y ** q for (p, q), c in self.terms)

    def at(self, z):
        z = np.asarray(z, dtype=complex)
        return self(z.real, z.imag)

    def laplacian_at_zero(self) -> float:
        """dd-bar Q(0) = (Q_xx + Q_yy)/4."""
        return 0.5 * (self.coefficient(2, 0) + self.coefficient(0, 2))

    def validate(self):
        """Unique minimum at 0 with positive Laplacian; raises otherwise."""
        if self.degree % 2:
            raise ValidationError("planar potential must have even degree")
        if self.coefficient(1, 0) or self.coefficient(0, 1):
            raise ValidationError("planar potential has a nonzero gradient at 0")
        a, b, c = 2 * self.coefficient(2, 0), self.coefficient(1, 1), 2 * self.coefficient(0, 2)
        if a <= 0 or a * c - b * b <= 0:
            raise ValidationError("planar potential Hessian at 0 is not positive definite")
        theta = np.linspace(0, 2 * np.pi, 721)
        top = sum(cf * np.cos(theta) ** p * np.sin(theta) ** q
                  for (p, q), cf in self.terms if p + q == self.degree)
        if np.min(top) <= 0:
            raise ValidationError("planar potential does not grow in every direction")
        g = np.linspace(-3, 3, 241)
        xx, yy = np.meshgrid(g, g)
        vals = self(xx, yy) - self.coefficient(0, 0)
        mask = (xx ** 2 + yy ** 2) > 1e-12
        if np.min(vals[mask]) <= 0:
            idx = np.argmin(np.where(mask, vals, np.inf))
            raise ValidationError(
                f"sampled minimum is not at 0 (value {vals.ravel()[idx]:.3e} at "
                f"({xx.ravel()[idx]:.3g}, {yy.ravel()[idx]:.3g}))")
        return self

    def key(self) -> str:
        return json.dumps([[p, q, c] for (p, q), c in self.terms])


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _radial_window(Q: PlanarPolynomial, n: int, s: int):
    """Radial range where r^{s+1} max_theta e^{-nQ} is within e^{-DROP} of its peak."""
    theta = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    hi = 1.0

    def profile(r):
        r = np.asarray(r)[:, None]
        vals = (s + 1) * np.log(r) - n * Q(r * np.cos(theta), r * np.sin(theta))
        return vals.max(axis=1)

    while True:
        grid = np.linspace(hi / 4000, hi, 4000)
        vals = profile(grid)
        top = vals.max()
        if vals[-1] < top - DROP - 5 and vals.argmax() < grid.size - 1:
            break
        hi *= 2.0
        if hi > 1e12:
            raise NumericError("moment integrand does not decay")
    keep = np.nonzero(vals >= top - DROP)[0]
    lo = grid[max(keep[0] - 1, 0)] if keep[0] > 0 else 0.0
    return lo, grid[min(keep[-1] + 1, grid.size - 1)]


def _antidiagonal_pass(Q, n, s, lo, hi, panels, m_theta):
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    r = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    wr = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    theta = 2 * np.pi * np.arange(m_theta) / m_theta
    with np.errstate(divide="ignore"):
        logv = (s + 1) * np.log(r)[:, None] - n * Q(r[:, None] * np.cos(theta), r[:, None] * np.sin(theta))
    top = logv.max()
    angular = (np.exp(logv - top) * wr[:, None]).sum(axis=0) * (2 * np.pi / m_theta)
    ell = np.arange(-s, s + 1, 2)  # j - k for j = 0..s
    coeffs = np.exp(1j * np.outer(ell, theta)) @ angular / np.pi
    # int |z|^s e^{-nQ} dA bounds every |J_{jk}| on this antidiagonal
    return top, coeffs, angular.sum() / np.pi


@functools.lru_cache(maxsize=512)
def _antidiagonal(qkey: str, n: int, s: int):
    Q = PlanarPolynomial(tuple(((p, q), c) for p, q, c in json.loads(qkey)))
    lo, hi = _radial_window(Q, n, s)
    panels, m_theta = 16, 64 + 4 * s
    top, prev, _ = _antidiagonal_pass(Q, n, s, lo, hi, panels, m_theta)
    for _ in range(5):
        panels *= 2
        m_theta *= 2
        top2, cur, bound = _antidiagonal_pass(Q, n, s, lo, hi, panels, m_theta)
        cur = cur * math.exp(top2 - top)
        floor = 1e-13 * bound * math.exp(top2 - top)
        if np.max(np.abs(cur - prev)) <= floor:
            # entries under the resolution (odd-symmetry zeros) are set to 0
            cur = np.where(np.abs(cur) <= 0.1 * floor, 0.0, cur)
            return top, cur
        prev = cur
    raise NumericError(f"planar moment quadrature did not converge for j + k = {s}")


def _moment_log(Q: PlanarPolynomial, n: int, j: int, k: int):
    s = j + k
    top, coeffs = _antidiagonal(Q.key(), int(n), s)
    c = coeffs[j]  # index j corresponds to ell = 2j - s = j - k
    if c == 0:
        return -math.inf, 0.0
    return top + math.log(abs(c)), math.atan2(c.imag, c.real)


def _check_moment_args(Q, j, k, cap):
    if not isinstance(Q, PlanarPolynomial):
        raise ValidationError("planar moments need a PlanarPolynomial potential")
    if j < 0 or k < 0:
        raise ValidationError("moment indices must be nonnegative")
    if cap is not None and max(j, k) > cap:
        raise ValidationError(f"moment degree {max(j, k)} exceeds the cap {cap}")
    Q.validate()


def planar_moment(Q: PlanarPolynomial, n: int, j: int, k: int, cap: int | None = MOMENT_DEGREE_CAP) -> LogComplex:
    """<e_j, e_k> = int z^j conj(z)^k e^{-nQ(z)} dA(z), dA = dx dy / pi."""
    _check_moment_args(Q, j, k, cap)
    lm, ph = _moment_log(Q, n, j, k)
    return LogComplex(lm, ph)


def moment_matrix(Q: PlanarPolynomial, n: int, m: int, cap: int | None = MOMENT_DEGREE_CAP):
    """All moments J_{jk}, j, k <= m, as (log_modulus, phase) arrays."""
    _check_moment_args(Q, m, m, cap)
    log_mod = np.empty((m + 1, m + 1))
    phase = np.empty((m + 1, m + 1))
    for j in range(m + 1):
        for k in range(m + 1):
            log_mod[j, k], phase[j, k] = _moment_log(Q, n, j, k)
    return log_mod, phase


def monomial_norms_closed_form(profile: RadialProfile, n: int, d: int, j) -> np.ndarray:
    """log h_j for V = alpha r^{2 beta}: Gamma(m / beta) / (beta Gamma(m) (n alpha)^{m / beta}), m = j + d.

    Only single-term profiles have this form; others raise ValidationError.
    """
    if profile.kind == "power":
        alpha, beta = profile.scale / profile.b, profile.b
    elif len(profile.terms) == 1:
        e, c = profile.terms[0]
        alpha, beta = profile.scale * c, e / 2
    else:
        raise ValidationError("closed form needs a single-term profile")
    m = np.asarray(j, dtype=float) + d
    return gammaln(m / beta) - math.log(beta) - gammaln(m) - (m / beta) * math.log(n * alpha)
