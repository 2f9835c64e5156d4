"""Exception hierarchy shared across the package."""


class GoldcastError(Exception):
    """Base class for all package errors."""


class DataError(GoldcastError, ValueError):
    """Malformed, inconsistent, or insufficient input data."""


class NumericError(GoldcastError, ArithmeticError):
    """Training diverged or produced non-finite values."""


class ConfigError(GoldcastError, ValueError):
    """Invalid run configuration."""
