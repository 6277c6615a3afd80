"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: config problems exit 2, size-cap
violations exit 3, numeric failures exit 4.
"""


class KcipLabError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(KcipLabError, ValueError):
    """A parameter is outside its documented domain."""


class InvalidStateError(KcipLabError, ValueError):
    """A chain state violates the precondition of an operation."""


class SizeCapError(KcipLabError):
    """An enumeration or recursion would exceed its configured cap."""


class NumericError(KcipLabError):
    """A linear solve or iteration failed to reach its tolerance.

    Carries the achieved residual when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class HorizonError(KcipLabError):
    """A scan exceeded its step horizon. Carries the last value seen."""

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class ConfigError(KcipLabError, ValueError):
    """An experiment configuration cannot be parsed or validated."""
