"""Finite-n weighted polynomial Bergman kernels and their scaling limits.

Finite-n kernels are returned as LogComplex (or as (log_modulus, phase)
arrays by the ``*_many`` variants); every series is summed anchored on its
largest term, so the e^{+-n O(1)} range never touches a float directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import quad
from .errors import DegreeCapError, DomainError, ValidationError
from .lognum import LogComplex, LogReal, log_sum_complex_rows, logsumexp_rows
from .potentials import PotentialModel, RadialProfile, droplet_radius
from .specfun import log_erfc_array

__all__ = [
    "LogComplex",
    "KernelJob",
    "radial_kernel",
    "radial_kernel_many",
    "tensor_kernel",
    "tensor_kernel_many",
    "kernel",
    "kernel_many",
    "partial_radial_kernel",
    "normalized_partial_kernel",
    "extremal_partial_kernel",
    "GramBasis",
    "gram_basis",
    "gram_partial_kernel",
    "limit_ginibre",
    "limit_erfc",
    "limit_mverfc",
    "limit_ginibre_many",
    "limit_erfc_many",
    "limit_mverfc_many",
    "hw_predicted_density",
]

_CHUNK = 1 << 21  # entries per (points x degrees) block
_LOG_HALF = math.log(0.5)


@dataclass(frozen=True)
class KernelJob:
    model: PotentialModel
    n: int
    tables: tuple  # one NormTable (radial, dimension d) or one per factor (tensor, d = 1)

    @classmethod
    def build(cls, model: PotentialModel, n: int) -> "KernelJob":
        n = int(n)
        if n < 1:
            raise ValidationError("n must be a positive integer")
        if model.is_radial:
            tables = (quad.norm_table(model.profile, n, model.d),)
        else:
            tables = tuple(quad.norm_table(f, n, 1) for f in model.factors)
        return cls(model, n, tables)

    def __post_init__(self):
        expected = 1 if self.model.is_radial else self.model.d
        if len(self.tables) != expected or any(t.n != self.n for t in self.tables):
            raise ValidationError("norm tables are inconsistent with (model, n)")


def _points(z, d):
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        z = z.reshape(1, -1) if d > 1 or z.size == 1 else z.reshape(-1, 1)
    if z.shape[-1] != d:
        raise ValidationError(f"points must have {d} coordinates")
    return z.reshape(-1, d)


def _one(z):
    return np.atleast_1d(np.asarray(z, dtype=complex)).reshape(1, -1)


def _log_power(log_base, j):
    """j * log_base with 0 * (-inf) read as 0."""
    with np.errstate(invalid="ignore"):
        out = j[None, :] * log_base[:, None]
    return np.where(j[None, :] == 0, 0.0, out)


def _log_factorials(terms):
    return np.concatenate([[np.longdouble(0)], np.cumsum(np.log(np.arange(1, terms, dtype=np.longdouble)))])


def _monomial_series(log_x, arg_x, log_h, terms):
    """Rows of sum_{j<terms} x^j / (j! h_j) as (log_modulus, phase).

    Summed in extended precision, like the tensor rows: off the diagonal the
    terms cancel by many orders of magnitude.
    """
    ld = np.longdouble
    j = np.arange(terms).astype(ld)
    coef = -_log_factorials(terms) - np.asarray(log_h[:terms]).astype(ld)
    log_x = np.asarray(log_x).astype(ld)
    arg_x = np.asarray(arg_x).astype(ld)
    out_log = np.empty(log_x.size)
    out_ph = np.empty(log_x.size)
    step = max(1, _CHUNK // max(terms, 1))
    for s in range(0, log_x.size, step):
        sl = slice(s, s + step)
        lm = _log_power(log_x[sl], j) + coef[None, :]
        top = lm.max(axis=1)
        safe = np.where(np.isfinite(top), top, ld(0))
        total = (np.exp(lm - safe[:, None]) * np.exp(1j * (j[None, :] * arg_x[sl, None]))).sum(axis=1)
        with np.errstate(divide="ignore"):
            lmod = safe + np.log(np.abs(total))
        out_log[sl] = np.where(np.isfinite(top), lmod, -np.inf).astype(float)
        out_ph[sl] = np.where(np.isfinite(out_log[sl]), np.arctan2(total.imag, total.real), 0.0).astype(float)
    return out_log, out_ph


def _radial_many(job: KernelJob, z, w, terms):
    model = job.model
    d = model.d
    z = _points(z, d)
    w = _points(w, d)
    ip = np.sum(z.astype(np.clongdouble) * w.astype(np.clongdouble).conj(), axis=1)
    with np.errstate(divide="ignore"):
        log_x = np.log(np.abs(ip))
    table = job.tables[0]
    if terms > len(table):
        raise ValidationError(f"at most {len(table)} terms are tabulated")
    lm, ph = _monomial_series(log_x, np.arctan2(ip.imag, ip.real), table.log_values, terms)
    p = model.profile
    weight = -0.5 * job.n * (p.V(np.linalg.norm(z, axis=1)) + p.V(np.linalg.norm(w, axis=1)))
    return lm + weight, ph


def radial_kernel_many(job: KernelJob, z, w):
    """Radial kernel at paired rows of z and w, as (log_modulus, phase) arrays."""
    _require(job, radial=True)
    return _radial_many(job, z, w, job.n)


def radial_kernel(job: KernelJob, z, w) -> LogComplex:
    """e^{-n(V(|z|)+V(|w|))/2} sum_{j<n} (z.w)^j / (j! h_j)."""
    lm, ph = radial_kernel_many(job, _one(z), _one(w))
    return LogComplex(float(lm[0]), float(ph[0]))


def _require(job, radial):
    if job.model.is_radial != radial:
        kind = "radial" if radial else "tensor"
        raise ValidationError(f"this kernel needs a {kind} model")


def _factor_terms(job, k, zk, wk):
    """Per-point coefficient rows t_k(j), j < n, as top_k * scaled_k(j).

    The rows are formed in extended precision: off-diagonal sums can cancel
    by several orders of magnitude, and the per-term rounding of double
    arithmetic would then dominate the result.
    """
    f = job.model.factors[k]
    n = job.n
    ld = np.longdouble
    x = zk.astype(np.clongdouble) * wk.astype(np.clongdouble).conj()
    with np.errstate(divide="ignore"):
        log_x = np.log(np.abs(x))
    j = np.arange(n)
    log_fact = _log_factorials(n)
    lm = _log_power(log_x, j.astype(ld)) - log_fact[None, :] - job.tables[k].log_values[None, :n].astype(ld)
    lm += (-0.5 * n * (f.V(np.abs(zk)) + f.V(np.abs(wk)))).astype(ld)[:, None]
    top = lm.max(axis=1)
    angle = np.arctan2(x.imag, x.real)
    scaled = np.exp(lm - top[:, None]) * np.exp(1j * (j[None, :] * angle[:, None]))
    return top, scaled


def tensor_kernel_many(job: KernelJob, z, w):
    """Tensorized kernel at paired rows, via degree convolution."""
    _require(job, radial=False)
    d = job.model.d
    n = job.n
    z = _points(z, d)
    w = _points(w, d)
    tops = np.zeros(z.shape[0], dtype=np.longdouble)
    scaled = []
    for k in range(d):
        top, s = _factor_terms(job, k, z[:, k], w[:, k])
        tops += top
        scaled.append(s)
    if d == 1:
        total = scaled[0].sum(axis=1)
        extra = np.zeros(z.shape[0])
    else:
        total = np.empty(z.shape[0], dtype=np.clongdouble)
        extra = np.zeros(z.shape[0])
        for p in range(z.shape[0]):
            acc = scaled[0][p]
            for k in range(1, d - 1):
                acc = np.convolve(acc, scaled[k][p])[:n]
                peak = np.max(np.abs(acc))
                if peak > 0:
                    acc = acc / peak
                    extra[p] += math.log(peak)
            # pair degree s of the partial product with degrees <= n-1-s of the last factor
            prefix = np.cumsum(scaled[-1][p])
            total[p] = np.dot(acc, prefix[::-1][: acc.size])
    with np.errstate(divide="ignore"):
        lm = (tops + np.log(np.abs(total))).astype(float) + extra
    ph = np.arctan2(total.imag, total.real).astype(float)
    return lm, np.where(np.isfinite(lm), ph, 0.0)


def tensor_kernel(job: KernelJob, z, w) -> LogComplex:
    lm, ph = tensor_kernel_many(job, _one(z), _one(w))
    return LogComplex(float(lm[0]), float(ph[0]))


def kernel_many(job: KernelJob, z, w):
    if job.model.is_radial:
        return radial_kernel_many(job, z, w)
    return tensor_kernel_many(job, z, w)


def kernel(job: KernelJob, z, w) -> LogComplex:
    lm, ph = kernel_many(job, _one(z), _one(w))
    return LogComplex(float(lm[0]), float(ph[0]))


# -- partial kernels ---------------------------------------------------------

def partial_radial_kernel(job: KernelJob, m: int, z, w) -> LogComplex:
    """Radial kernel truncated to degrees j <= m."""
    _require(job, radial=True)
    if not 0 <= m < job.n + job.model.d:
        raise ValidationError(f"m must satisfy 0 <= m < n + d, got {m}")
    d = job.model.d
    lm, ph = _radial_many(job, _one(z), _one(w), m + 1)
    return LogComplex(float(lm[0]), float(ph[0]))


def normalized_partial_kernel(profile: RadialProfile, n: int, m: int, z):
    """e^{-nV(|z'|)} / (n dQ) * sum_{j<=m} |P_j(z')|^2 with z' = z / sqrt(n dQ).

    ``profile`` is a planar radial profile used as given (no rescaling) and
    dQ is its Laplacian at the origin. Returns a float array.
    """
    if not 0 <= m <= quad.MAX_DEGREE_FACTOR * n:
        raise ValidationError("m out of range")
    lap0 = float(profile.laplacian(0.0))
    if lap0 <= 0:
        raise ValidationError("the profile needs a positive Laplacian at the origin")
    table = quad.norm_table(profile, n, 1, count=m + 1)
    r = np.abs(np.atleast_1d(np.asarray(z, dtype=complex))).ravel() / math.sqrt(n * lap0)
    with np.errstate(divide="ignore"):
        log_x = 2.0 * np.log(r)
    lm, _ = _monomial_series(log_x, np.zeros(r.size), table.log_values, m + 1)
    return np.exp(lm - n * profile.V(r) - math.log(n * lap0))


def extremal_partial_kernel(Q: quad.PlanarPolynomial, n: int, m: int, z) -> LogReal:
    """sum_{j<=m} (J_00 / J_jj) |z|^{2j} from the diagonal planar moments."""
    if m > quad.MOMENT_DEGREE_CAP:
        raise ValidationError(f"m exceeds the moment cap {quad.MOMENT_DEGREE_CAP}")
    diag = np.array([quad.planar_moment(Q, n, j, j).log_modulus for j in range(m + 1)])
    r = abs(complex(z))
    j = np.arange(m + 1)
    powers = 2.0 * j * math.log(r) if r > 0 else np.where(j == 0, 0.0, -math.inf)
    terms = diag[0] - diag + powers
    return LogReal(float(logsumexp_rows(terms[None, :])[0]), 1)


@dataclass(frozen=True)
class GramBasis:
    """Orthonormal polynomials P = L^{-1} D e with D = diag(J_jj^{-1/2})."""

    Q: quad.PlanarPolynomial
    n: int
    m: int
    log_diag: np.ndarray  # log J_jj
    L: np.ndarray  # Cholesky factor of D J D
    residual: float  # max |<P_j, e_k>| / sqrt(J_kk) over k < j

    def values(self, z) -> np.ndarray:
        """P_0(z) .. P_m(z) for an array of z, shape (points, m + 1)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        j = np.arange(self.m + 1)
        with np.errstate(divide="ignore"):
            log_r = np.log(np.abs(z))
        lm = _log_power(log_r, j) - 0.5 * self.log_diag[None, :]
        scaled = np.exp(lm) * np.exp(1j * j[None, :] * np.angle(z)[:, None])
        return _forward_solve(self.L, scaled.T).T


def _forward_solve(L, b):
    x = np.array(b, dtype=complex)
    for i in range(L.shape[0]):
        x[i] = (x[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def _cholesky_capped(a, pivot_tol=1e-13):
    """Hermitian Cholesky; stops at the first pivot below ``pivot_tol``."""
    size = a.shape[0]
    L = np.zeros_like(a, dtype=complex)
    for i in range(size):
        pivot = a[i, i].real - np.sum(np.abs(L[i, :i]) ** 2)
        if pivot < pivot_tol:
            raise DegreeCapError(
                f"moment matrix loses positivity at degree {i} (pivot {pivot:.3e})", usable_degree=i - 1)
        L[i, i] = math.sqrt(pivot)
        for r in range(i + 1, size):
            L[r, i] = (a[r, i] - L[r, :i] @ L[i, :i].conj()) / L[i, i]
    return L


def gram_basis(Q: quad.PlanarPolynomial, n: int, m: int) -> GramBasis:
    """Orthonormalize 1, z, .., z^m against e^{-nQ} dA via the moment matrix."""
    log_mod, phase = quad.moment_matrix(Q, n, m)
    log_diag = np.diag(log_mod).copy()
    scale = -0.5 * (log_diag[:, None] + log_diag[None, :])
    with np.errstate(invalid="ignore"):
        scaled = np.where(np.isfinite(log_mod), np.exp(log_mod + scale) * np.exp(1j * phase), 0.0)
    L = _cholesky_capped(scaled)
    inv = _forward_solve(L, np.eye(m + 1, dtype=complex))
    residual = float(np.max(np.abs(np.tril(inv @ scaled, -1)), initial=0.0))
    return GramBasis(Q, int(n), int(m), log_diag, L, residual)


def gram_partial_kernel(Q: quad.PlanarPolynomial, n: int, m: int, z, w, weighted: bool = True,
                        basis: GramBasis | None = None) -> LogComplex:
    """sum_{j<=m} P_j(z) conj(P_j(w)), times e^{-n(Q(z)+Q(w))/2} if weighted."""
    basis = gram_basis(Q, n, m) if basis is None else basis
    pz = basis.values(z)[0]
    pw = basis.values(w)[0]
    out = LogComplex.from_complex(complex(np.dot(pz, pw.conj())))
    if weighted:
        out = out.scale(-0.5 * n * (float(Q.at(z)) + float(Q.at(w))))
    return out


# -- limiting kernels --------------------------------------------------------

def _pairs(xi, eta):
    xi = np.asarray(xi, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    if xi.ndim < 2:
        xi = xi.reshape(1, -1)
        eta = eta.reshape(1, -1)
    if xi.shape != eta.shape:
        raise ValidationError("xi and eta must have matching shapes")
    return xi, eta


def _gauss_part(xi, eta):
    ip = np.sum(xi * eta.conj(), axis=1)
    lm = ip.real - 0.5 * (np.sum(np.abs(xi) ** 2, axis=1) + np.sum(np.abs(eta) ** 2, axis=1))
    return lm, ip.imag


def limit_ginibre_many(xi, eta):
    """exp(xi.eta - (|xi|^2 + |eta|^2)/2) for rows of xi, eta."""
    return _gauss_part(*_pairs(xi, eta))


def limit_mverfc_many(xi, eta):
    """(1/2) exp(xi.eta - ...) erfc(sum_k (xi_k + conj eta_k) / sqrt(2d))."""
    xi, eta = _pairs(xi, eta)
    d = xi.shape[1]
    lm, ph = _gauss_part(xi, eta)
    arg = np.sum(xi + eta.conj(), axis=1) / math.sqrt(2 * d)
    le, pe = log_erfc_array(arg)
    return lm + _LOG_HALF + le, ph + pe


limit_erfc_many = limit_mverfc_many  # d = 1 rows


def limit_ginibre(xi, eta) -> LogComplex:
    lm, ph = limit_ginibre_many(np.atleast_1d(xi), np.atleast_1d(eta))
    return LogComplex(float(lm[0]), float(ph[0]))


def limit_erfc(xi, eta) -> LogComplex:
    lm, ph = limit_mverfc_many([[complex(xi)]], [[complex(eta)]])
    return LogComplex(float(lm[0]), float(ph[0]))


def limit_mverfc(xi, eta, dim: int | None = None) -> LogComplex:
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    eta = np.atleast_1d(np.asarray(eta, dtype=complex))
    if dim is not None and xi.size != dim:
        raise ValidationError(f"expected {dim} coordinates, got {xi.size}")
    lm, ph = limit_mverfc_many(xi, eta)
    return LogComplex(float(lm[0]), float(ph[0]))


# -- near-boundary monomial density -----------------------------------------

def hw_predicted_density(profile: RadialProfile, tau: float, n: int, j: int, z, collar: float = 10.0) -> LogReal:
    """Gaussian profile of |P_j(z)|^2 e^{-nV(|z|)} near the circle |z| = r_tau.

    (1/sqrt(2 pi)) sqrt(n dQ) / r_tau * exp(-(2 Re xi + (tau n - j)/(r_tau sqrt(n dQ)))^2 / 2),
    with Re xi = sqrt(n dQ) (|z| - r_tau) and dQ the Laplacian at r_tau.
    Points farther than ``collar`` * sqrt(log n / n) from the circle are rejected.
    """
    r_tau = droplet_radius(profile, tau)
    if r_tau <= 0:
        raise DomainError("tau must be positive")
    r = abs(complex(z))
    if abs(r - r_tau) > collar * math.sqrt(math.log(max(n, 2)) / n):
        raise DomainError("point lies outside the boundary collar")
    lap = float(profile.laplacian(r_tau))
    s = math.sqrt(n * lap)
    xi = s * (r - r_tau)
    shift = (tau * n - j) / (r_tau * s)
    log_val = -0.5 * math.log(2 * math.pi) + math.log(s / r_tau) - 0.5 * (2.0 * xi + shift) ** 2
    return LogReal(log_val, 1)
