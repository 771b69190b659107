"""Exception types shared across the package."""


class ClueClusterError(Exception):
    """Base class for all package errors."""


class InvalidInput(ClueClusterError):
    """An argument violates a documented precondition."""


class InvalidState(ClueClusterError):
    """An operation was called on an object in the wrong state."""


class NumericalError(ClueClusterError):
    """A computation produced NaN/inf or an otherwise unusable value."""


class IoError(ClueClusterError):
    """A file could not be read or written as required."""
