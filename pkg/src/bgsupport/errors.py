"""Exception types shared across the package."""


class BgSupportError(Exception):
    """Base class for package errors."""


class NumericalError(BgSupportError, ArithmeticError):
    """An iterative kernel failed to converge.

    ``shape`` records the dimensions of the offending matrix.
    """

    def __init__(self, message, shape=None):
        super().__init__(message)
        self.shape = shape


class DomainError(BgSupportError, ValueError):
    """Input outside the mathematical domain of an operation."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class EnumerationLimitError(BgSupportError, ValueError):
    """An exhaustive search would exceed its enumeration cap."""


class ConfigError(BgSupportError, ValueError):
    """Invalid experiment configuration."""
