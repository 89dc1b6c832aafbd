"""Exception types shared across the package.

The CLI maps these onto distinct exit codes: data problems exit 1,
configuration problems exit 2, numeric failures exit 3.
"""


class LogadError(Exception):
    """Base class for package errors."""


class DataError(LogadError):
    """Input data is missing, unreadable, or violates a data contract."""


class ConfigError(LogadError):
    """A configuration value or combination is invalid."""


class NumericError(LogadError):
    """A numeric computation produced a non-finite or invalid result."""
