"""Exception types shared across the package."""


class GreensignError(Exception):
    """Base class for all package errors."""


class ValidationError(GreensignError, ValueError):
    """Malformed input: bad index sets, out-of-range orders, bad settings."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NotApplicableError(GreensignError):
    """A result was requested outside the hypotheses that define it."""


class PreconditionError(GreensignError):
    """An operation was called on data that does not meet its precondition."""


class DegenerateSpaceError(GreensignError):
    """Inserting an index into a boundary set would duplicate an entry."""


class EigenvalueCollisionError(GreensignError):
    """The boundary matrix is numerically singular, so M is an eigenvalue."""

    def __init__(self, message, det_magnitude):
        super().__init__(message)
        self.det_magnitude = det_magnitude


class NumericalConsistencyError(GreensignError, ArithmeticError):
    """A computed quantity failed an internal consistency check."""
