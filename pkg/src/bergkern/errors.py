"""Exception hierarchy. The CLI maps these onto exit codes."""


class BergkernError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ValidationError(BergkernError, ValueError):
    """Invalid input: bad model, bad config, precondition violated."""

    exit_code = 2


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a function."""


class OffBoundaryError(ValidationError):
    """A point that should lie on the droplet boundary does not."""


class NumericError(BergkernError, ArithmeticError):
    """Numerical failure: window exceeded, conditioning, non-convergence."""

    exit_code = 3


class WindowError(NumericError):
    """Complex argument outside the documented working window."""


class DegreeCapError(NumericError):
    """Moment Gram matrix lost positivity at working precision."""

    def __init__(self, message, usable_degree):
        super().__init__(message)
        self.usable_degree = usable_degree
