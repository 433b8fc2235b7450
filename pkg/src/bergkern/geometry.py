"""Droplets, obstacle functions and edge frames.

The pluricomplex obstacle of a tensorized potential is the maximum over the
simplex of a sum of planar obstacles. Each planar term has derivative
2 log(|z_k| / r_tau) in tau, so the maximizer is found by water-filling on
a common level lambda.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NumericError, ValidationError
from .potentials import (
    PotentialModel,
    RadialProfile,
    boundary_margin,
    complex_hessian,
    droplet_radius,
    hessian_inv_sqrt,
    ma_determinant,
)

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class SimplexWeights:
    tau: tuple

    def __post_init__(self):
        tau = tuple(float(t) for t in self.tau)
        if not tau:
            raise ValidationError("simplex weights need at least one entry")
        if any(not math.isfinite(t) or t < 0 for t in tau):
            raise ValidationError(f"simplex weights must be finite and nonnegative: {tau}")
        if abs(sum(tau) - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"simplex weights must sum to 1, got {sum(tau)!r}")
        object.__setattr__(self, "tau", tau)

    @classmethod
    def normalized(cls, tau) -> "SimplexWeights":
        tau = np.clip(np.asarray(tau, dtype=float), 0.0, None)
        return cls(tuple(tau / tau.sum()))

    def __len__(self):
        return len(self.tau)

    def __getitem__(self, k):
        return self.tau[k]

    @property
    def support(self):
        return tuple(k for k, t in enumerate(self.tau) if t > 0)


def planar_obstacle(profile: RadialProfile, tau: float, z) -> float:
    """Maximal subharmonic minorant of V(|z|) with growth tau log|z|^2."""
    r = abs(complex(z))
    if tau <= 0:
        return float(profile.V(0.0))
    r_tau = droplet_radius(profile, tau)
    if r <= r_tau:
        return float(profile.V(r))
    return float(profile.V(r_tau)) + 2.0 * tau * math.log(r / r_tau)


def simplex_objective(model: PotentialModel, z, tau) -> float:
    """Sum of planar obstacles at the given split of the mass."""
    _require_tensor(model)
    z = np.asarray(z, dtype=complex).reshape(-1)
    return sum(planar_obstacle(f, t, zk) for f, t, zk in zip(model.factors, tau, z))


def _require_tensor(model):
    if model.is_radial:
        raise ValidationError("operation requires a tensorized model")


def _radial_obstacle(model: PotentialModel, z) -> float:
    r = float(np.linalg.norm(z))
    p = model.profile
    if r <= 1.0:
        return float(p.V(r))
    return float(p.V(1.0)) + 2.0 * math.log(r)


def pluri_obstacle(model: PotentialModel, z):
    """Obstacle function at z and the maximizing simplex weights.

    For radial models the droplet is the unit ball and the weights are
    returned as None.
    """
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.size != model.d:
        raise ValidationError(f"point has {z.size} coordinates, model has d = {model.d}")
    if model.is_radial:
        return _radial_obstacle(model, z), None
    mods = np.abs(z)
    factors = model.factors
    sat = np.array([float(f.rdV(m)) / 2.0 for f, m in zip(factors, mods)])
    total = sat.sum()
    if total <= 1.0:
        # inside the droplet: any tau dominating the saturation levels works
        tau = sat + (1.0 - total) / z.size
        return float(model.Q(z)), SimplexWeights.normalized(tau)
    live = mods > 0

    def taus(lam):
        shrink = math.exp(-0.5 * lam)
        out = np.zeros(z.size)
        for k in np.nonzero(live)[0]:
            out[k] = float(factors[k].rdV(mods[k] * shrink)) / 2.0
        return out

    hi = 1.0
    while taus(hi).sum() > 1.0:
        hi *= 2.0
        if hi > 1e4:
            raise NumericError("water-filling level bracket failed")
    lam = brentq(lambda t: taus(t).sum() - 1.0, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    shrink = math.exp(-0.5 * lam)
    value = lam + sum(float(factors[k].V(mods[k] * shrink)) for k in np.nonzero(live)[0])
    value += sum(float(factors[k].V(0.0)) for k in np.nonzero(~live)[0])
    return value, SimplexWeights.normalized(taus(lam))


def droplet_contains(model: PotentialModel, z):
    """(inside?, margin); the margin is 2 - |z|V'(|z|) (radial) or
    1 - sum_k |z_k| V_k'(|z_k|) / 2 (tensor)."""
    margin = boundary_margin(model, z)
    return margin >= 0, margin


@dataclass(frozen=True)
class EdgeFrame:
    z0: np.ndarray
    tau: SimplexWeights | None
    normal: np.ndarray
    hessian: np.ndarray
    hessian_inv_sqrt: np.ndarray
    ma_det: float
    U: np.ndarray
    phases: np.ndarray  # diagonal of D; 1 on coordinates carrying no mass

    @property
    def d(self) -> int:
        return self.z0.size

    @property
    def degenerate(self) -> bool:
        return self.tau is not None and len(self.tau.support) < self.d

    def to_record(self) -> dict:
        """Flat record with complex entries as [re, im] pairs."""
        pair = lambda c: [float(np.real(c)), float(np.imag(c))]
        return {
            "z0": [pair(c) for c in self.z0],
            "tau": None if self.tau is None else list(self.tau.tau),
            "normal": [pair(c) for c in self.normal],
            "U": [[pair(c) for c in row] for row in self.U],
            "ma_det": float(self.ma_det),
        }


def householder_swap(a, b) -> np.ndarray:
    """Real reflection exchanging unit vectors a and b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = a - b
    norm = np.linalg.norm(w)
    if norm < 1e-15:
        return np.eye(a.size)
    w = w / norm
    return np.eye(a.size) - 2.0 * np.outer(w, w)


def _unit_phase(c):
    return c / abs(c) if abs(c) > 0 else 1.0 + 0.0j


def edge_frame(model: PotentialModel, *, direction=None, tau=None, angles=None) -> EdgeFrame:
    """Frame at a droplet boundary point.

    Radial models take a nonzero ``direction`` (normalized to the unit
    sphere); tensor models take simplex weights ``tau`` and per-coordinate
    ``angles``. The unitary U satisfies U (1,...,1)/sqrt(d) = normal for
    radial models and = D (1,..,1,0,..,0)/sqrt(l) for tensor models.
    """
    d = model.d
    u_d = np.full(d, 1.0 / math.sqrt(d))
    if model.is_radial:
        if direction is None:
            raise ValidationError("radial frames need a direction")
        direction = np.asarray(direction, dtype=complex).reshape(-1)
        norm = float(np.linalg.norm(direction))
        if direction.size != d or norm == 0:
            raise ValidationError("direction must be a nonzero vector of length d")
        z0 = direction / norm
        phases = np.array([_unit_phase(c) for c in z0])
        R = householder_swap(u_d, np.abs(z0))
        normal = z0.copy()
        weights = None
    else:
        if tau is None:
            raise ValidationError("tensor frames need simplex weights")
        weights = tau if isinstance(tau, SimplexWeights) else SimplexWeights(tuple(tau))
        if len(weights) != d:
            raise ValidationError("tau length does not match the model dimension")
        angles = np.zeros(d) if angles is None else np.asarray(angles, dtype=float).reshape(-1)
        if angles.size != d:
            raise ValidationError("angles length does not match the model dimension")
        radii = np.array([droplet_radius(f, t) for f, t in zip(model.factors, weights.tau)])
        z0 = radii * np.exp(1j * angles)
        live = np.array(weights.tau) > 0
        phases = np.where(live, np.exp(1j * angles), 1.0 + 0.0j)
        # gradient of sum_k |z_k| V_k'(|z_k|) / 2 in the coordinate directions
        grad = np.array([
            (float(f.dV(r)) + r * float(f.d2V(r))) / 2.0 if t > 0 else 0.0
            for f, r, t in zip(model.factors, radii, weights.tau)
        ])
        normal = phases * grad
        normal = normal / np.linalg.norm(normal)
        ell = int(live.sum())
        u_l = np.where(live, 1.0 / math.sqrt(ell), 0.0)
        R = householder_swap(u_l, u_d)
    U = np.diag(phases) @ R.astype(complex)
    return EdgeFrame(
        z0=z0,
        tau=weights,
        normal=normal,
        hessian=complex_hessian(model, z0),
        hessian_inv_sqrt=hessian_inv_sqrt(model, z0),
        ma_det=ma_determinant(model, z0),
        U=U,
        phases=phases,
    )


@dataclass(frozen=True)
class BulkFrame:
    z: np.ndarray
    hessian: np.ndarray
    hessian_inv_sqrt: np.ndarray
    ma_det: float


def bulk_frame(model: PotentialModel, z) -> BulkFrame:
    """Hessian data at an interior point, for bulk rescaling."""
    from .potentials import psd_inv_sqrt

    z = np.asarray(z, dtype=complex).reshape(-1)
    inside, margin = droplet_contains(model, z)
    if margin <= 0:
        raise ValidationError(f"bulk point must lie inside the droplet (margin {margin:.3e})")
    h = complex_hessian(model, z)
    return BulkFrame(z, h, psd_inv_sqrt(h), float(np.real(np.linalg.det(h))))
