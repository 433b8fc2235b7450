"""Edge and bulk scaling harnesses.

The finite-n kernel is evaluated at rescaled points around a frame and
compared with a limiting kernel. Kernels that differ by a cocycle
c(z) conj(c(w)) with |c| = 1 define the same point process, so diagonal
entries are compared as real values and off-diagonal entries by modulus.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import BulkFrame, EdgeFrame
from .kernels import (
    KernelJob,
    kernel_many,
    limit_ginibre_many,
    limit_mverfc_many,
)
from .lognum import LogComplex
from .specfun import _log_erfc

MODES = ("erfc_normal", "mverfc_unitary", "bulk_ginibre")
NORMALIZATIONS = ("det", "matrix")
REL_FLOOR = 0.05  # below this limit value errors are absolute


# -- rescaling ----------------------------------------------------------------

def _as_rows(x, width):
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1) if width > 1 else x.reshape(-1, 1)
    if x.shape[1] != width:
        raise ValidationError(f"rescaled variables need {width} coordinate(s), got {x.shape[1]}")
    return x


def rescaled_points(frame, mode: str, xi, n: int, normalization: str = "det"):
    """Points z(xi) in C^d for rows of xi."""
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; choose from {MODES}")
    if normalization not in NORMALIZATIONS:
        raise ValidationError(f"unknown normalization {normalization!r}")
    sq = math.sqrt(n)
    if mode == "bulk_ginibre":
        if not isinstance(frame, BulkFrame):
            raise ValidationError("bulk_ginibre mode needs a bulk frame")
        xi = _as_rows(xi, frame.z.size)
        return frame.z[None, :] + (xi @ frame.hessian_inv_sqrt.T) / sq
    if not isinstance(frame, EdgeFrame):
        raise ValidationError(f"{mode} mode needs an edge frame")
    if mode == "erfc_normal":
        xi = _as_rows(xi, 1)
        step = frame.hessian_inv_sqrt @ frame.normal
        return frame.z0[None, :] + xi * step[None, :] / sq
    xi = _as_rows(xi, frame.d)
    if normalization == "det":
        return frame.z0[None, :] + (xi @ frame.U.T) / math.sqrt(n * frame.ma_det)
    return frame.z0[None, :] + (xi @ (frame.hessian_inv_sqrt @ frame.U).T) / sq


def _log_normalizer(job: KernelJob, frame) -> float:
    return job.model.d * math.log(job.n) + math.log(frame.ma_det)


def rescaled_kernel_many(job: KernelJob, frame, mode: str, xi, eta, normalization: str = "det"):
    """K_n(z(xi), z(eta)) / (n^d det ddbar Q) for paired rows, as (log_modulus, phase)."""
    z = rescaled_points(frame, mode, xi, job.n, normalization)
    w = rescaled_points(frame, mode, eta, job.n, normalization)
    lm, ph = kernel_many(job, z, w)
    return lm - _log_normalizer(job, frame), ph


def rescaled_kernel(job: KernelJob, frame, mode: str, xi, eta, normalization: str = "det") -> LogComplex:
    lm, ph = rescaled_kernel_many(job, frame, mode, [xi] if np.ndim(xi) else xi,
                                  [eta] if np.ndim(eta) else eta, normalization)
    return LogComplex(float(lm[0]), float(ph[0]))


def limit_values(mode: str, xi, eta):
    """Limiting kernel for ``mode`` at paired rows, as (log_modulus, phase)."""
    if mode == "bulk_ginibre":
        return limit_ginibre_many(xi, eta)
    return limit_mverfc_many(xi, eta)


# -- comparison ---------------------------------------------------------------

def pair_errors(finite, limit, diagonal):
    """Cocycle-invariant errors. Returns (finite_value, limit_value, abs_err, err).

    Diagonal pairs compare real parts, other pairs compare moduli; ``err``
    is relative where the limit value is >= REL_FLOOR and absolute below.
    """
    flm, fph = finite
    llm, lph = limit
    f_mod = np.exp(flm)
    l_mod = np.exp(llm)
    f_val = np.where(diagonal, f_mod * np.cos(fph), f_mod)
    l_val = np.where(diagonal, l_mod * np.cos(lph), l_mod)
    abs_err = np.abs(f_val - l_val)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(np.abs(l_val) >= REL_FLOOR, abs_err / np.abs(l_val), abs_err)
    return f_val, l_val, abs_err, rel


def _grid_arrays(grid, width):
    xi = np.array([np.atleast_1d(np.asarray(a, dtype=complex)) for a, _ in grid]).reshape(-1, width)
    eta = np.array([np.atleast_1d(np.asarray(b, dtype=complex)) for _, b in grid]).reshape(-1, width)
    return xi, eta


def _mode_width(frame, mode):
    if mode == "erfc_normal":
        return 1
    return frame.z.size if isinstance(frame, BulkFrame) else frame.d


def compare_to_limit(job: KernelJob, frame, mode: str, grid, normalization: str = "det"):
    """(sup_error, rows) over a grid of (xi, eta) pairs."""
    grid = list(grid)
    if not grid:
        return 0.0, []
    width = _mode_width(frame, mode)
    xi, eta = _grid_arrays(grid, width)
    finite = rescaled_kernel_many(job, frame, mode, xi, eta, normalization)
    limit = limit_values(mode, xi, eta)
    diagonal = np.all(xi == eta, axis=1)
    f_val, l_val, abs_err, err = pair_errors(finite, limit, diagonal)
    rows = [
        {
            "n": job.n,
            "xi": xi[i].tolist(),
            "eta": eta[i].tolist(),
            "finite_value": float(f_val[i]),
            "limit_value": float(l_val[i]),
            "abs_err": float(abs_err[i]),
            "rel_err": float(err[i]),
        }
        for i in range(len(grid))
    ]
    return float(np.max(err)), rows


def default_grid(d: int, bound: float = 1.5, step: float = 0.5, cap: int = 400, diagonal: bool = False):
    """(xi, eta) pairs from a Re/Im lattice in C^d restricted to |xi| <= bound.

    Larger pair sets are thinned to ``cap`` entries with an even stride, so
    the selection is deterministic.
    """
    ticks = np.arange(-bound, bound + 0.5 * step, step)
    coord = [complex(a, b) for a in ticks for b in ticks]
    points = [np.array(p) for p in itertools.product(coord, repeat=d)
              if np.linalg.norm(p) <= bound + 1e-12]
    if diagonal:
        pairs = [(p, p) for p in points]
    else:
        pairs = [(p, q) for p in points for q in points]
    if cap is not None and len(pairs) > cap:
        keep = np.unique(np.linspace(0, len(pairs) - 1, cap).round().astype(int))
        pairs = [pairs[i] for i in keep]
    return pairs


@dataclass
class ScalingReport:
    model_id: str
    frame: dict
    mode: str
    n_list: list
    grid: list
    sup_errors: list
    fitted_rate: float
    normalization: str = "det"
    rows: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValidationError("n_list must be strictly increasing")
        if any(e < 0 for e in self.sup_errors):
            raise ValidationError("sup errors must be nonnegative")

    def summary(self) -> dict:
        return {
            "model": self.model_id,
            "mode": self.mode,
            "normalization": self.normalization,
            "frame": self.frame,
            "n_list": list(self.n_list),
            "sup_errors": [float(e) for e in self.sup_errors],
            "fitted_rate": float(self.fitted_rate),
            "grid_pairs": len(self.grid),
        }


def fit_rate(n_list, errors) -> float:
    """Least-squares slope of log(error) against log(n)."""
    x = np.log(np.asarray(n_list, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def _frame_record(frame):
    if isinstance(frame, EdgeFrame):
        return frame.to_record()
    return {"z": [[float(c.real), float(c.imag)] for c in frame.z], "ma_det": frame.ma_det}


def convergence_study(model, frame, mode: str, grid, n_list, normalization: str = "det", mapper=map) -> ScalingReport:
    """compare_to_limit for each n, plus the fitted decay exponent."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3 or n_list[-1] < 4 * n_list[0]:
        raise ValidationError("n_list needs at least 3 values spanning 2 octaves")
    grid = list(grid)

    def one(n):
        return compare_to_limit(KernelJob.build(model, n), frame, mode, grid, normalization)

    results = list(mapper(one, n_list))
    errors = [r[0] for r in results]
    rows = [row for r in results for row in r[1]]
    return ScalingReport(model.key(), _frame_record(frame), mode, n_list, grid, errors,
                         fit_rate(n_list, errors), normalization, rows)


def bulk_degenerate_check(job: KernelJob, frame: EdgeFrame, grid, normalization: str = "matrix"):
    """Diagonal comparison with (1/2) erfc(sqrt 2 Re sum_k xi_k / sqrt d)."""
    if frame.tau is None:
        raise ValidationError("bulk-degenerate check needs a tensor frame")
    diag = [(a, a) for a, b in grid if np.array_equal(np.asarray(a), np.asarray(b))]
    return compare_to_limit(job, frame, "mverfc_unitary", diag, normalization)


# -- steepest decay -------------------------------------------------------------

@dataclass(frozen=True)
class DecayResult:
    direction: np.ndarray  # complex d-vector of unit length
    angle_to_normal: float
    max_direction: np.ndarray
    angle_max_to_inward: float


def _real(v):
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag])


def _angle(a, b):
    a = _real(a)
    b = _real(b)
    c = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    return math.acos(max(-1.0, min(1.0, c)))


def _sphere(rng, count, dim):
    u = rng.normal(size=(count, dim))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _cone(rng, center, count, angle):
    """Unit vectors within ``angle`` of ``center`` (real, dim 2d)."""
    dim = center.size
    t = rng.normal(size=(count, dim))
    t -= np.outer(t @ center, center)
    t /= np.maximum(np.linalg.norm(t, axis=1, keepdims=True), 1e-300)
    theta = angle * np.sqrt(rng.uniform(size=(count, 1)))
    out = np.cos(theta) * center[None, :] + np.sin(theta) * t
    return np.vstack([center[None, :], out])


def steepest_decay_direction(job: KernelJob, frame: EdgeFrame, radius: float | None = None,
                             samples: int = 128, seed: int = 0, refine=(0.5, 0.25, 0.1)) -> DecayResult:
    """Direction of fastest decay of the diagonal kernel around the frame point.

    Evaluates log K_n(z0 + radius u, z0 + radius u) over sampled unit
    directions u in R^{2d}, then refines inside shrinking cones around the
    current minimizer (and maximizer).
    """
    if samples < 64:
        raise ValidationError("use at least 64 sample directions")
    d = frame.d
    radius = 3.0 / math.sqrt(job.n) if radius is None else float(radius)
    rng = np.random.default_rng(seed)

    def values(units):
        pts = frame.z0[None, :] + radius * (units[:, :d] + 1j * units[:, d:])
        return kernel_many(job, pts, pts)[0]

    units = _sphere(rng, samples, 2 * d)
    vals = values(units)
    best_min = units[np.argmin(vals)]
    best_max = units[np.argmax(vals)]
    for angle in refine:
        cand = _cone(rng, best_min, samples, angle)
        best_min = cand[np.argmin(values(cand))]
        cand = _cone(rng, best_max, samples, angle)
        best_max = cand[np.argmax(values(cand))]
    to_c = lambda u: u[:d] + 1j * u[d:]
    dmin, dmax = to_c(best_min), to_c(best_max)
    return DecayResult(dmin, _angle(dmin, frame.normal), dmax, _angle(dmax, -frame.normal))


# -- reproducing property of the half-space erfc kernel ------------------------

def halfspace_kernel_log(xi, eta, v):
    """log of (1/2) e^{xi.eta} erfc((xi.v + v.eta)/sqrt 2), complex."""
    xi = np.asarray(xi, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    arg = (np.sum(xi * np.conj(v), axis=-1) + np.sum(v * eta.conj(), axis=-1)) / math.sqrt(2)
    lm, ph = _log_erfc(np.atleast_1d(arg))
    return math.log(0.5) + np.sum(xi * eta.conj(), axis=-1) + lm + 1j * ph


def _orthonormal_completion(v):
    """Real orthogonal matrix with first column v (v real unit vector)."""
    d = v.size
    basis = np.linalg.qr(np.column_stack([v, np.eye(d)]))[0]
    if basis[:, 0] @ v < 0:
        basis[:, 0] *= -1
    return basis


def reproducing_pairing(xi, eta, v=None, x_range=10.0, x_nodes=240, y_nodes=240, gh_nodes=40):
    """Numerically integrate int K(zeta, eta) conj K(zeta, xi) e^{-|zeta|^2} d omega.

    The kernel depends on zeta through zeta.v and the orthogonal part, so
    the integral splits. The v-component is integrated on a rectangle in x
    and with y = tan(u) in the imaginary direction (the integrand decays
    like 1/y^2 there); the orthogonal part uses Gauss-Hermite nodes.
    Returns (pairing, kernel(xi, eta)) as complex numbers.
    """
    xi = np.asarray(xi, dtype=complex).reshape(-1)
    eta = np.asarray(eta, dtype=complex).reshape(-1)
    d = xi.size
    v = np.full(d, 1.0 / math.sqrt(d)) if v is None else np.asarray(v, dtype=float).reshape(-1)
    v = v / np.linalg.norm(v)
    B = _orthonormal_completion(v)
    xr = B.T @ xi
    er = B.T @ eta

    # v-part: one complex variable w = x + i y
    gx, wx = np.polynomial.legendre.leggauss(x_nodes)
    x = x_range * gx
    wxs = x_range * wx
    gu, wu = np.polynomial.legendre.leggauss(y_nodes)
    u = 0.5 * math.pi * gu
    y = np.tan(u)
    wy = 0.5 * math.pi * wu / np.cos(u) ** 2
    w = (x[:, None] + 1j * y[None, :]).ravel()
    e1 = np.array([1.0])
    k_eta = halfspace_kernel_log(w[:, None], np.full((w.size, 1), er[0]), e1)
    k_xi = halfspace_kernel_log(w[:, None], np.full((w.size, 1), xr[0]), e1)
    log_int = k_eta + np.conj(k_xi) - np.abs(w) ** 2
    weights = (wxs[:, None] * wy[None, :]).ravel() / math.pi
    part_v = np.sum(np.exp(log_int) * weights)

    # orthogonal part: Fock-space pairing of exponentials, by Gauss-Hermite
    part_perp = 1.0 + 0.0j
    if d > 1:
        gh, gw = np.polynomial.hermite.hermgauss(gh_nodes)
        X, Y = np.meshgrid(gh, gh, indexing="ij")
        W = np.outer(gw, gw) / math.pi
        zeta = X + 1j * Y
        for k in range(1, d):
            part_perp *= np.sum(np.exp(zeta * np.conj(er[k]) + np.conj(zeta) * xr[k]) * W)
    pairing = part_v * part_perp
    target = complex(np.exp(halfspace_kernel_log(xi[None, :], eta[None, :], v)[0]))
    return complex(pairing), target
