"""Exception taxonomy shared across the package.

Input/config/data problems map to CLI exit code 1, numerical failures to 2.
"""


class TentcastError(Exception):
    """Base class for all package errors."""


class InputError(TentcastError):
    """A value passed to an operation violates its preconditions."""


class ConfigError(TentcastError):
    """A configuration file or parameter set is invalid or inconsistent."""


class DataError(TentcastError):
    """An input dataset violates its contract (coverage gaps, bad joins, ...)."""


class NumericalError(TentcastError):
    """A linear-algebra or optimization step failed beyond recovery."""
