"""Potential models: radial V(|z|) on C^d and tensorized sums of planar
radial factors, with derivatives, droplet radii and complex Hessians.

Measure convention throughout: dA = dx dy / pi per complex coordinate.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import NumericError, OffBoundaryError, ValidationError

BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class RadialProfile:
    """V(r) = scale * sum c_k r^{2k} (polynomial) or scale * r^{2b}/b (power)."""

    kind: str
    terms: tuple = ()
    b: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "polynomial":
            terms = tuple(sorted((int(e), float(c)) for e, c in self.terms))
            if not terms:
                raise ValidationError("polynomial profile needs at least one term")
            for e, c in terms:
                if e <= 0 or e % 2:
                    raise ValidationError(f"exponent must be a positive even integer, got {e}")
                if not (c >= 0 and math.isfinite(c)):
                    raise ValidationError(f"coefficients must be finite and nonnegative, got {c}")
            if not any(c > 0 for _, c in terms):
                raise ValidationError("polynomial profile needs a positive coefficient")
            merged = {}
            for e, c in terms:
                merged[e] = merged.get(e, 0.0) + c
            object.__setattr__(self, "terms", tuple(sorted(merged.items())))
            object.__setattr__(self, "b", None)
        elif self.kind == "power":
            if self.b is None or not (float(self.b) > 0 and math.isfinite(float(self.b))):
                raise ValidationError(f"power profile needs b > 0, got {self.b}")
            object.__setattr__(self, "b", float(self.b))
            object.__setattr__(self, "terms", ())
        else:
            raise ValidationError(f"unknown profile kind {self.kind!r}")
        if not (float(self.scale) > 0 and math.isfinite(float(self.scale))):
            raise ValidationError("profile scale must be positive")
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def polynomial(cls, terms) -> "RadialProfile":
        """``terms`` is an iterable of (even exponent, coefficient) pairs."""
        return cls("polynomial", tuple(terms))

    @classmethod
    def power(cls, b: float) -> "RadialProfile":
        return cls("power", b=b)

    def scaled(self, factor: float) -> "RadialProfile":
        return RadialProfile(self.kind, self.terms, self.b, self.scale * factor)

    def V(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "polynomial":
            out = sum(c * r ** e for e, c in self.terms)
        else:
            out = r ** (2 * self.b) / self.b
        return self.scale * out

    def dV(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "polynomial":
            out = sum(e * c * r ** (e - 1) for e, c in self.terms)
        else:
            out = 2.0 * r ** (2 * self.b - 1)
        return self.scale * out

    def d2V(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "polynomial":
            out = sum(e * (e - 1) * c * r ** (e - 2) for e, c in self.terms)
        else:
            out = 2.0 * (2 * self.b - 1) * r ** (2 * self.b - 2)
        return self.scale * out

    def rdV(self, r):
        """r V'(r), strictly increasing from 0."""
        r = np.asarray(r, dtype=float)
        if self.kind == "polynomial":
            out = sum(e * c * r ** e for e, c in self.terms)
        else:
            out = 2.0 * r ** (2 * self.b)
        return self.scale * out

    def laplacian(self, r):
        """Planar Laplacian dd-bar V(|z|) = (V'' + V'/r)/4, with its limit at r = 0."""
        r = np.asarray(r, dtype=float)
        if self.kind == "polynomial":
            # (V'' + V'/r)/4 = sum k^2 c_k r^{2k-2}
            out = sum((e / 2) ** 2 * c * r ** (e - 2) for e, c in self.terms)
        else:
            with np.errstate(divide="ignore"):
                out = self.b * r ** (2 * self.b - 2)
        return self.scale * out

    def smooth_at_origin(self) -> bool:
        """Whether V(|z|) is C^2 at z = 0."""
        return self.kind == "polynomial" or self.b >= 1.0

    def to_dict(self) -> dict:
        if self.kind == "polynomial":
            out = {"terms": [{"exponent": e, "coefficient": c} for e, c in self.terms]}
        else:
            out = {"power_b": self.b}
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out

    @classmethod
    def from_config(cls, spec) -> "RadialProfile":
        """Accepts a list of {exponent, coefficient}, or {power_b}, or {terms: [...]}."""
        scale = 1.0
        if isinstance(spec, dict):
            scale = float(spec.get("scale", 1.0))
            if "power_b" in spec:
                return cls("power", b=spec["power_b"], scale=scale)
            if "terms" not in spec:
                raise ValidationError("profile needs 'terms' or 'power_b'")
            spec = spec["terms"]
        if isinstance(spec, (list, tuple)) and len(spec) == 1 and isinstance(spec[0], dict) and "power_b" in spec[0]:
            return cls("power", b=spec[0]["power_b"], scale=scale)
        try:
            terms = [(int(t["exponent"]), float(t["coefficient"])) for t in spec]
        except (TypeError, KeyError) as exc:
            raise ValidationError(f"malformed profile terms: {spec!r}") from exc
        return cls("polynomial", tuple(terms), scale=scale)


def droplet_radius(profile: RadialProfile, tau: float) -> float:
    """The r with r V'(r) = 2 tau."""
    tau = float(tau)
    if not 0.0 <= tau <= 1.0 + 1e-12:
        raise ValidationError(f"tau must lie in [0, 1], got {tau}")
    if tau <= 0.0:
        return 0.0
    target = 2.0 * tau
    if profile.kind == "power":
        return (target / (2.0 * profile.scale)) ** (1.0 / (2.0 * profile.b))
    hi = 1.0
    while float(profile.rdV(hi)) <= target:
        hi *= 2.0
        if hi > 1e150:
            raise NumericError("droplet radius bracket failed")
    lo = hi / 2.0
    while float(profile.rdV(lo)) >= target:
        lo *= 1e-3
    # solve in log r so that tiny tau keeps full relative accuracy
    log_target = math.log(target)
    s = brentq(lambda t: math.log(float(profile.rdV(math.exp(t)))) - log_target,
               math.log(lo), math.log(hi), xtol=1e-15, rtol=1e-15, maxiter=500)
    return math.exp(s)


@dataclass(frozen=True)
class PotentialModel:
    variant: str
    d: int
    profile: RadialProfile | None = None
    factors: tuple = ()
    normalization_scale: float = 1.0
    name: str = field(default="", compare=False)

    @classmethod
    def radial(cls, profile: RadialProfile, d: int, normalize: bool = True) -> "PotentialModel":
        if int(d) < 1:
            raise ValidationError(f"dimension must be positive, got {d}")
        scale = 1.0
        if normalize:
            slope = float(profile.dV(1.0))
            scale = 2.0 / slope
            profile = profile.scaled(scale)
        return cls("radial", int(d), profile, (), scale)

    @classmethod
    def tensor(cls, factors) -> "PotentialModel":
        factors = tuple(factors)
        if not factors:
            raise ValidationError("tensor model needs at least one factor")
        for f in factors:
            if not isinstance(f, RadialProfile):
                raise ValidationError("tensor factors must be RadialProfile instances")
        return cls("tensor", len(factors), None, factors, 1.0)

    @classmethod
    def ginibre(cls, d: int) -> "PotentialModel":
        return cls.radial(RadialProfile.polynomial([(2, 1.0)]), d)

    @property
    def is_radial(self) -> bool:
        return self.variant == "radial"

    def planar_profiles(self):
        """Per-coordinate planar profiles (tensor) or the radial profile repeated."""
        if self.is_radial:
            return (self.profile,) * self.d
        return self.factors

    def Q(self, z):
        """Potential at points z of shape (..., d)."""
        z = np.asarray(z, dtype=complex)
        if self.is_radial:
            return self.profile.V(np.linalg.norm(z, axis=-1))
        return sum(f.V(np.abs(z[..., k])) for k, f in enumerate(self.factors))

    def to_dict(self) -> dict:
        if self.is_radial:
            raw = self.profile.scaled(1.0 / self.normalization_scale)
            return {"variant": "radial", "d": self.d, "profile": raw.to_dict()}
        return {"variant": "tensor", "d": self.d, "factors": [f.to_dict() for f in self.factors]}

    def key(self) -> str:
        """Canonical serialization, used as a cache key."""
        if self.is_radial:
            payload = {"variant": "radial", "d": self.d, "profile": self.profile.to_dict()}
        else:
            payload = self.to_dict()
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_config(cls, spec: dict) -> "PotentialModel":
        if not isinstance(spec, dict):
            raise ValidationError("model must be a mapping")
        variant = spec.get("variant")
        if variant == "radial":
            if "profile" not in spec or "d" not in spec:
                raise ValidationError("radial model needs 'profile' and 'd'")
            return cls.radial(RadialProfile.from_config(spec["profile"]), int(spec["d"]))
        if variant == "tensor":
            if "factors" not in spec:
                raise ValidationError("tensor model needs 'factors'")
            model = cls.tensor(RadialProfile.from_config(f) for f in spec["factors"])
            if "d" in spec and int(spec["d"]) != model.d:
                raise ValidationError("'d' disagrees with the number of factors")
            return model
        raise ValidationError(f"unknown model variant {variant!r}")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""
    radius: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]


def _profile_checks(profile: RadialProfile, label: str):
    checks = []
    r_max = 4.0 * max(droplet_radius(profile, 1.0), 1.0)
    grid = np.linspace(r_max / 10_000, r_max, 10_000)
    rdv = profile.rdV(grid)
    steps = np.diff(rdv)
    bad = np.nonzero(steps <= 0)[0]
    if bad.size:
        checks.append(Check(f"{label}monotone_rV'", False, "r V'(r) not strictly increasing", float(grid[bad[0] + 1])))
    else:
        checks.append(Check(f"{label}monotone_rV'", True, f"strictly increasing on (0, {r_max:.4g}]"))
    at_zero = float(profile.rdV(1e-12))
    checks.append(Check(f"{label}rV'_vanishes_at_0", at_zero < 1e-10, f"r V'(r) at r=1e-12 is {at_zero:.3e}"))
    big = 1e3
    growth = float(profile.V(big)) / math.log(big)
    checks.append(Check(f"{label}growth", growth > 2.0, f"V(r)/log r at r=1e3 is {growth:.3e}", big))
    smooth = profile.smooth_at_origin()
    checks.append(Check(f"{label}C2_at_origin", smooth,
                        "smooth" if smooth else "V'' is singular at r = 0", None if smooth else 0.0))
    return checks


def validate(model: PotentialModel) -> ValidationReport:
    checks = []
    if model.is_radial:
        checks += _profile_checks(model.profile, "")
        slope = float(model.profile.dV(1.0))
        checks.append(Check("normalization_V'(1)=2", abs(slope - 2.0) < 1e-12, f"V'(1) = {slope!r}", 1.0))
    else:
        for k, f in enumerate(model.factors):
            checks += _profile_checks(f, f"factor{k}:")
    return ValidationReport(tuple(checks))


def _as_point(model: PotentialModel, z):
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.size != model.d:
        raise ValidationError(f"point has {z.size} coordinates, model has d = {model.d}")
    return z


def complex_hessian(model: PotentialModel, z) -> np.ndarray:
    """The d x d matrix dd-bar Q(z)."""
    z = _as_point(model, z)
    if not model.is_radial:
        return np.diag([complex(f.laplacian(abs(zk))) for f, zk in zip(model.factors, z)])
    p = model.profile
    r = float(np.linalg.norm(z))
    if r == 0.0:
        if not p.smooth_at_origin():
            raise ValidationError("complex Hessian undefined at the origin for this profile")
        return complex(p.laplacian(0.0)) * np.eye(model.d, dtype=complex)
    iso = float(p.dV(r)) / (2 * r)
    rank_one = (r * float(p.d2V(r)) - float(p.dV(r))) / (4 * r ** 3)
    return iso * np.eye(model.d, dtype=complex) + rank_one * np.outer(z, z.conj())


def ma_determinant(model: PotentialModel, z) -> float:
    """det dd-bar Q(z) in closed form."""
    z = _as_point(model, z)
    if not model.is_radial:
        return float(np.prod([f.laplacian(abs(zk)) for f, zk in zip(model.factors, z)]))
    p = model.profile
    r = float(np.linalg.norm(z))
    if r == 0.0:
        return float(np.real(np.linalg.det(complex_hessian(model, z))))
    d = model.d
    return float(p.dV(r)) ** (d - 1) * (r * float(p.d2V(r)) + float(p.dV(r))) / (2 ** (d + 1) * r ** d)


def boundary_margin(model: PotentialModel, z) -> float:
    z = _as_point(model, z)
    if model.is_radial:
        return 2.0 - float(model.profile.rdV(np.linalg.norm(z)))
    return 1.0 - sum(float(f.rdV(abs(zk))) / 2.0 for f, zk in zip(model.factors, z))


def hessian_inv_sqrt(model: PotentialModel, z0) -> np.ndarray:
    """(dd-bar Q(z0))^{-1/2} at a droplet boundary point."""
    z0 = _as_point(model, z0)
    margin = boundary_margin(model, z0)
    if abs(margin) > BOUNDARY_TOL:
        raise OffBoundaryError(f"point is not on the droplet boundary (margin {margin:.3e})")
    if model.is_radial:
        r = float(np.linalg.norm(z0))
        u = z0 / r
        lap = float(model.profile.laplacian(r))
        iso = float(model.profile.dV(r)) / (2 * r)
        if iso <= 0 or lap <= 0:
            raise NumericError("Hessian is not positive definite at this boundary point")
        # eigenvalues: iso on the complement of z0, lap along z0
        proj = np.outer(u, u.conj())
        return (np.eye(model.d) - proj) / math.sqrt(iso) + proj / math.sqrt(lap)
    diag = [float(f.laplacian(abs(zk))) for f, zk in zip(model.factors, z0)]
    if min(diag) <= 0:
        raise NumericError("Hessian is singular at this boundary point")
    return np.diag([1.0 / math.sqrt(v) for v in diag]).astype(complex)


def psd_inv_sqrt(h) -> np.ndarray:
    """Inverse square root of a Hermitian positive definite matrix."""
    vals, vecs = np.linalg.eigh(np.asarray(h, dtype=complex))
    if vals.min() <= 0:
        raise NumericError("matrix is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.conj().T
