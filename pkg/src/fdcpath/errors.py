"""Exception types shared across the package."""


class FdcError(Exception):
    """Base class for all errors raised by fdcpath."""


class ValidationError(FdcError, ValueError):
    """Raised when caller-supplied arguments violate a precondition."""


class ConsistencyError(FdcError, RuntimeError):
    """Raised when two constructions that must agree do not.

    ``residual`` carries the offending magnitude so callers can report it.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalError(FdcError, ArithmeticError):
    """Raised when an iterative routine fails to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
