"""Exception hierarchy shared by all cuspext modules."""


class CuspextError(Exception):
    """Base class for every error raised by this package."""


class DomainError(CuspextError, ValueError):
    """A point or parameter lies outside the set an operation is defined on."""


class ConfigurationError(CuspextError, ValueError):
    """Invalid quadrature, map or run configuration."""


class CompositionError(CuspextError):
    """An intermediate image left the validity region of the next map."""


class EvaluationError(CuspextError, ArithmeticError):
    """Numerical evaluation failed at a specific location."""

    def __init__(self, message, location=None):
        if location is not None:
            message = f"{message} at {tuple(float(c) for c in location)}"
        super().__init__(message)
        self.location = location


class InsufficientDataError(CuspextError):
    """Too few cutoff levels to classify a series."""


class PreconditionError(CuspextError):
    """An input violates a stated precondition (e.g. a non-member test function)."""
