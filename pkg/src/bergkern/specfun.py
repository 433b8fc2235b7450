"""Special functions: log-gamma, regularized incomplete gamma, real and
complex erfc, the number-variance profile f(delta), and the half-space
Gaussian integral.

Complex erfc goes through the Faddeeva function w(z) = e^{-z^2} erfc(-iz),
evaluated only in the closed upper half-plane: a rational series
(Weideman's expansion) inside |z| < FADDEEVA_SPLIT and the Laplace
continued fraction outside.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import _gk
from .errors import DomainError, NumericError, ValidationError, WindowError

ERFC_WINDOW = 50.0
FADDEEVA_SPLIT = 6.0
_SQRT_PI = math.sqrt(math.pi)
_LOG_MAX = 709.0


@dataclass(frozen=True)
class ComplexValue:
    re: float
    im: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "re", float(self.re))
        object.__setattr__(self, "im", float(self.im))
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValidationError(f"ComplexValue fields must be finite, got ({self.re}, {self.im})")

    @classmethod
    def of(cls, z) -> "ComplexValue":
        if isinstance(z, ComplexValue):
            return z
        z = complex(z)
        return cls(z.real, z.imag)

    def to_complex(self) -> complex:
        return complex(self.re, self.im)

    def conj(self) -> "ComplexValue":
        return ComplexValue(self.re, -self.im)


# -- gamma family -----------------------------------------------------------

def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    x = float(x)
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def _log_gamma_stirling_tail(s: float) -> float:
    """lgamma(s) - [(s - 1/2) log s - s + log(2 pi)/2], asymptotic for s >= 10."""
    s2 = s * s
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0) / s2) / s2) / s2) / s


def _log_prefactor(s: float, x: float) -> float:
    """log(x^s e^{-x} / Gamma(s)), kept accurate for large s with x near s."""
    if x == 0:
        return -math.inf
    u = (x - s) / s
    if s < 10.0 or u < -0.5:
        # far below the peak the direct form loses nothing that matters
        return s * math.log(x) - x - math.lgamma(s)
    return s * (math.log1p(u) - u) + 0.5 * math.log(s / (2 * math.pi)) - _log_gamma_stirling_tail(s)


def _inc_gamma_series(s: float, x: float) -> float:
    """P(s, x) by the power series; converges for all x, fast for x < s + 1."""
    term = 1.0 / s
    total = term
    k = 0
    while True:
        k += 1
        term *= x / (s + k)
        total += term
        if term < total * 1e-17:
            break
        if k > 1_000_000:
            raise NumericError("incomplete gamma series did not converge")
    return math.exp(_log_prefactor(s, x)) * total


def _inc_gamma_cf(s: float, x: float) -> float:
    """Q(s, x) = 1 - P(s, x) by the Legendre continued fraction (x > s + 1)."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    k = 0
    while True:
        k += 1
        an = -k * (k - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
        if k > 1_000_000:
            raise NumericError("incomplete gamma continued fraction did not converge")
    return math.exp(_log_prefactor(s, x)) * h


def _check_gamma_args(s, x):
    s, x = float(s), float(x)
    if not s > 0:
        raise DomainError(f"incomplete gamma needs s > 0, got {s}")
    if not x >= 0:
        raise DomainError(f"incomplete gamma needs x >= 0, got {x}")
    return s, x


def reg_inc_gamma_lower(s: float, x: float) -> float:
    """Regularized lower incomplete gamma P(s, x) = gamma(s, x) / Gamma(s)."""
    s, x = _check_gamma_args(s, x)
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < s + 1.0:
        return min(1.0, _inc_gamma_series(s, x))
    return min(1.0, max(0.0, 1.0 - _inc_gamma_cf(s, x)))


def reg_inc_gamma_upper(s: float, x: float) -> float:
    """Q(s, x) = 1 - P(s, x), computed without cancellation in the tail."""
    s, x = _check_gamma_args(s, x)
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < s + 1.0:
        return min(1.0, max(0.0, 1.0 - _inc_gamma_series(s, x)))
    return min(1.0, _inc_gamma_cf(s, x))


# -- erfc -------------------------------------------------------------------

def erfc_real(x: float) -> float:
    return math.erfc(float(x))


def _weideman_coefficients(terms: int):
    # Coefficients of w(z) in powers of Z = (L + iz)/(L - iz), from the FFT
    # of exp(-t^2)(L^2 + t^2) sampled at t = L tan(theta/2).
    m = 2 * terms
    k = np.arange(-m + 1, m)
    length = math.sqrt(terms / math.sqrt(2.0))
    t = length * np.tan(0.5 * k * math.pi / m)
    f = np.concatenate([[0.0], np.exp(-t * t) * (length * length + t * t)])
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / (2 * m)
    return length, a[1:terms + 1][::-1].copy()


_W_LENGTH, _W_COEFFS = _weideman_coefficients(40)


def _faddeeva_near(z):
    iz = 1j * z
    zz = (_W_LENGTH + iz) / (_W_LENGTH - iz)
    p = np.polyval(_W_COEFFS, zz)
    return 2.0 * p / (_W_LENGTH - iz) ** 2 + (1.0 / _SQRT_PI) / (_W_LENGTH - iz)


def _faddeeva_far(z, depth=None):
    if depth is None:
        mag = float(np.min(np.abs(z))) if np.size(z) else FADDEEVA_SPLIT
        depth = int(min(400, max(24, 1200.0 / max(mag, 1.0) ** 2 + 24)))
    t = np.array(z, dtype=complex, copy=True)
    for k in range(depth, 0, -1):
        t = z - (0.5 * k) / t
    return 1j / (_SQRT_PI * t)


def faddeeva_upper(z):
    """w(z) for Im z >= 0 (array or scalar)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag < 0):
        raise DomainError("faddeeva_upper needs Im z >= 0")
    out = np.empty_like(z)
    near = np.abs(z) < FADDEEVA_SPLIT
    if near.any():
        out[near] = _faddeeva_near(z[near])
    if (~near).any():
        out[~near] = _faddeeva_far(z[~near])
    return out


def faddeeva(z):
    """w(z) on the whole plane via w(z) = 2 e^{-z^2} - w(-z) below the axis."""
    z = np.asarray(z, dtype=complex)
    upper = z.imag >= 0
    out = np.empty_like(z)
    if upper.any():
        out[upper] = faddeeva_upper(z[upper])
    if (~upper).any():
        zl = z[~upper]
        out[~upper] = 2.0 * np.exp(-zl * zl) - faddeeva_upper(-zl)
    return out


def _check_window(z):
    if np.any(np.abs(z.real) > ERFC_WINDOW) or np.any(np.abs(z.imag) > ERFC_WINDOW):
        raise WindowError(f"erfc argument outside the window |Re|, |Im| <= {ERFC_WINDOW}")


def log_erfc_array(z):
    """Complex log of erfc(z), elementwise, without overflow.

    Returns (log_modulus, phase) arrays.
    """
    z = np.asarray(z, dtype=complex)
    _check_window(z)
    return _log_erfc(z)


def _log_erfc(z):
    """Body of :func:`log_erfc_array` without the window check.

    Valid wherever |Re z| stays moderate (e^{Re z^2} must not overflow);
    the imaginary part is unrestricted.
    """
    right = z.real >= 0
    s = np.where(right, z, -z)
    # log erfc(s) for Re s >= 0, where i s lies in the upper half-plane
    log_e = -s * s + np.log(faddeeva_upper(1j * s))
    out = log_e.copy()
    left = ~right
    if left.any():
        le = log_e[left]
        small = le.real < 0.5 * _LOG_MAX
        direct = np.empty_like(le)
        direct[small] = np.log(2.0 - np.exp(le[small]))
        big = ~small
        # log(2 - e^L) = L + log(-1 + 2 e^{-L})
        direct[big] = le[big] + np.log(-1.0 + 2.0 * np.exp(-le[big]) + 0j)
        out[left] = direct
    return out.real, np.angle(np.exp(1j * out.imag))


def erfc_complex_array(z):
    """erfc(z) elementwise as complex numbers; raises if any value overflows."""
    log_mod, phase = log_erfc_array(z)
    if np.any(log_mod > _LOG_MAX):
        raise NumericError("erfc value exceeds double range; use log_erfc_array")
    return np.exp(log_mod) * np.exp(1j * phase)


def erfc_complex(z) -> ComplexValue:
    """Complex complementary error function inside the documented window."""
    zc = ComplexValue.of(z).to_complex()
    if zc.imag == 0.0:
        return ComplexValue(math.erfc(zc.real), 0.0)
    value = complex(erfc_complex_array(np.array([zc]))[0])
    return ComplexValue(value.real, value.imag)


def erfcx_real(x):
    """Scaled erfc, e^{x^2} erfc(x), for real x (array or scalar)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = faddeeva_upper(1j * x[pos]).real
    xn = x[~pos]
    out[~pos] = np.exp(xn * xn) * (2.0 - np.array([math.erfc(-v) for v in xn.ravel()]).reshape(xn.shape))
    return out if out.ndim else float(out)


# -- f(delta) ---------------------------------------------------------------

_F_TAIL = 6.5  # erfc(6.5) ~ 4e-20, so the integrand is < 1e-18 of its peak beyond


def _f_integrand(t):
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    vals = np.array([math.erfc(v) * math.erfc(-v) for v in flat]) / 4.0
    return vals.reshape(t.shape)


def f_delta(delta: float, step: float = 0.25) -> float:
    """Number-variance profile sqrt(2 pi) * int_delta^inf erfc(t) erfc(-t)/4 dt."""
    delta = float(delta)
    lo = max(delta, -_F_TAIL)
    hi = max(_F_TAIL, lo + 3.0)
    value, _ = _gk.integrate(_f_integrand, lo, hi, rtol=1e-14, atol=1e-17, step=step)
    return math.sqrt(2 * math.pi) * value


# -- half-space Gaussian ----------------------------------------------------

def spd_cholesky(a, rel_pivot=1e-12):
    """Cholesky factor of a symmetric matrix, rejecting small or negative pivots."""
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("matrix must be square")
    scale = float(np.max(np.abs(np.diag(a)))) if a.size else 0.0
    if not scale > 0 or not np.allclose(a, a.T, rtol=0, atol=1e-12 * scale):
        raise ValidationError("matrix is not symmetric positive definite")
    dim = a.shape[0]
    low = np.zeros_like(a)
    for i in range(dim):
        pivot = a[i, i] - low[i, :i] @ low[i, :i]
        if pivot <= rel_pivot * scale:
            raise ValidationError(f"matrix is not symmetric positive definite (pivot {i} = {pivot:.3e})")
        low[i, i] = math.sqrt(pivot)
        for k in range(i + 1, dim):
            low[k, i] = (a[k, i] - low[k, :i] @ low[i, :i]) / low[i, i]
    return low


def halfspace_gaussian(A, v, b) -> float:
    """int_{x.v >= 0} exp(-x.A^{-1}x/2 - b.x) dx in closed form."""
    A = np.array(A, dtype=float)
    v = np.asarray(v, dtype=float)
    b = np.asarray(b, dtype=float)
    low = spd_cholesky(A)
    if not np.any(v != 0):
        raise ValidationError("half-space normal v must be nonzero")
    dim = A.shape[0]
    if v.shape != (dim,) or b.shape != (dim,):
        raise ValidationError("v and b must have the dimension of A")
    log_det = 2.0 * float(np.sum(np.log(np.diag(low))))
    quad = 0.5 * float(b @ A @ b)
    arg = float(b @ A @ v) / math.sqrt(2.0 * float(v @ A @ v))
    log_pref = math.log(0.5) + 0.5 * (dim * math.log(2 * math.pi) + log_det)
    if arg >= 0:
        log_val = log_pref + quad - arg * arg + math.log(float(erfcx_real(arg)))
    else:
        log_val = log_pref + quad + math.log(math.erfc(arg))
    return math.exp(log_val)


def halfspace_gaussian_mc(A, v, b, samples: int, seed: int = 0):
    """Monte Carlo estimate of halfspace_gaussian and its standard error.

    Samples x ~ N(0, A); the integral is (2 pi)^{d/2} sqrt(det A) E[exp(-b.x) 1{x.v >= 0}].
    """
    A = np.array(A, dtype=float)
    v = np.asarray(v, dtype=float)
    b = np.asarray(b, dtype=float)
    low = spd_cholesky(A)
    samples = int(samples)
    if samples < 2:
        raise ValidationError("need at least two samples")
    dim = A.shape[0]
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    scale = (2 * math.pi) ** (dim / 2) * float(np.prod(np.diag(low)))
    total = 0.0
    total_sq = 0.0
    chunk = 1 << 18
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        x = rng.standard_normal((size, dim)) @ low.T
        vals = np.where(x @ v >= 0, np.exp(-(x @ b)), 0.0)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += size
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return scale * mean, scale * math.sqrt(var / samples)
