"""Bergman kernels, edge limits and counting statistics for weighted
polynomial spaces on C^d."""

from .errors import (
    BergkernError,
    DegreeCapError,
    DomainError,
    NumericError,
    OffBoundaryError,
    ValidationError,
    WindowError,
)
from .potentials import PotentialModel, RadialProfile

__version__ = "0.1.0"
