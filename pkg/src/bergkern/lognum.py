"""Numbers stored by their logarithm.

Kernel values and norms span e^{+-n O(1)}, far outside double range for
moderate n. ``LogReal`` keeps (log|x|, sign), ``LogComplex`` keeps
(log|z|, arg z).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = float("-inf")


def wrap_phase(phase):
    """Map angles into (-pi, pi]. Works on scalars and arrays."""
    out = np.angle(np.exp(1j * np.asarray(phase, dtype=float)))
    out = np.where(out <= -math.pi, math.pi, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LogReal:
    log_value: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or 1")
        if math.isnan(self.log_value):
            raise ValueError("log_value is NaN")
        if self.sign == 0 and self.log_value != NEG_INF:
            object.__setattr__(self, "log_value", NEG_INF)
        if self.sign != 0 and self.log_value == NEG_INF:
            object.__setattr__(self, "sign", 0)

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(NEG_INF, 0)

    @classmethod
    def from_float(cls, x: float) -> "LogReal":
        if x == 0:
            return cls.zero()
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def value(self) -> float:
        """Plain float; may overflow to inf or underflow to 0."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_value)
        except OverflowError:
            return self.sign * math.inf

    def log10(self) -> float:
        return self.log_value / math.log(10.0)

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0 or other.sign == 0:
            return LogReal.zero()
        return LogReal(self.log_value + other.log_value, self.sign * other.sign)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.sign == 0:
            raise ZeroDivisionError("division by LogReal zero")
        if self.sign == 0:
            return LogReal.zero()
        return LogReal(self.log_value - other.log_value, self.sign * other.sign)

    def __neg__(self) -> "LogReal":
        return LogReal(self.log_value, -self.sign)

    def __add__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        hi, lo = (self, other) if self.log_value >= other.log_value else (other, self)
        ratio = math.exp(lo.log_value - hi.log_value)
        if hi.sign == lo.sign:
            return LogReal(hi.log_value + math.log1p(ratio), hi.sign)
        if ratio == 1.0:
            return LogReal.zero()
        return LogReal(hi.log_value + math.log1p(-ratio), hi.sign)

    def __sub__(self, other: "LogReal") -> "LogReal":
        return self + (-other)

    def to_dict(self) -> dict:
        return {"log_value": self.log_value, "sign": self.sign}


@dataclass(frozen=True)
class LogComplex:
    log_modulus: float
    phase: float = 0.0

    def __post_init__(self):
        if math.isnan(self.log_modulus) or math.isnan(self.phase):
            raise ValueError("LogComplex fields must not be NaN")
        if self.log_modulus == NEG_INF:
            object.__setattr__(self, "phase", 0.0)
        else:
            object.__setattr__(self, "phase", wrap_phase(self.phase))

    @classmethod
    def zero(cls) -> "LogComplex":
        return cls(NEG_INF, 0.0)

    @classmethod
    def from_complex(cls, z: complex) -> "LogComplex":
        if z == 0:
            return cls.zero()
        return cls(math.log(abs(z)), math.atan2(z.imag, z.real))

    @property
    def is_zero(self) -> bool:
        return self.log_modulus == NEG_INF

    def modulus(self) -> float:
        if self.is_zero:
            return 0.0
        try:
            return math.exp(self.log_modulus)
        except OverflowError:
            return math.inf

    def to_complex(self) -> complex:
        r = self.modulus()
        return complex(r * math.cos(self.phase), r * math.sin(self.phase))

    def real(self) -> float:
        return self.to_complex().real

    def conj(self) -> "LogComplex":
        return LogComplex(self.log_modulus, -self.phase)

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        if self.is_zero or other.is_zero:
            return LogComplex.zero()
        return LogComplex(self.log_modulus + other.log_modulus, self.phase + other.phase)

    def __truediv__(self, other: "LogComplex") -> "LogComplex":
        if other.is_zero:
            raise ZeroDivisionError("division by LogComplex zero")
        if self.is_zero:
            return LogComplex.zero()
        return LogComplex(self.log_modulus - other.log_modulus, self.phase - other.phase)

    def scale(self, log_factor: float) -> "LogComplex":
        """Multiply by the positive real e^{log_factor}."""
        if self.is_zero:
            return self
        return LogComplex(self.log_modulus + log_factor, self.phase)

    def __add__(self, other: "LogComplex") -> "LogComplex":
        return log_sum_complex(
            np.array([self.log_modulus, other.log_modulus]),
            np.array([self.phase, other.phase]),
        )

    def to_dict(self) -> dict:
        return {"log_modulus": self.log_modulus, "phase": self.phase}


def log_sum_complex(log_mod, phase) -> LogComplex:
    """Phase-coherent sum of terms given as (log-modulus, phase) arrays.

    Anchors on the largest term, sums the rest in scaled units.
    """
    lm, ph = log_sum_complex_rows(np.atleast_2d(log_mod), np.atleast_2d(phase))
    return LogComplex(float(lm[0]), float(ph[0]))


def log_sum_complex_rows(log_mod, phase):
    """Row-wise version of :func:`log_sum_complex` on 2D arrays."""
    log_mod = np.asarray(log_mod, dtype=float)
    phase = np.asarray(phase, dtype=float)
    top = np.max(log_mod, axis=-1)
    finite = np.isfinite(top)
    safe_top = np.where(finite, top, 0.0)
    scaled = np.exp(log_mod - safe_top[..., None]) * np.exp(1j * phase)
    total = scaled.sum(axis=-1)
    with np.errstate(divide="ignore"):
        out_log = np.where(finite, safe_top + np.log(np.abs(total)), -np.inf)
    out_phase = np.where(np.isfinite(out_log), np.angle(total), 0.0)
    return out_log, out_phase


def logsumexp_rows(log_values):
    """Row-wise log(sum(exp(x))) for positive terms."""
    log_values = np.asarray(log_values, dtype=float)
    top = np.max(log_values, axis=-1)
    safe_top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = safe_top + np.log(np.exp(log_values - safe_top[..., None]).sum(axis=-1))
    return np.where(np.isfinite(top), out, -np.inf)
