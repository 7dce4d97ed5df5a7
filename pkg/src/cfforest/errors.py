"""Exception types shared across the package."""


class CfForestError(Exception):
    """Base class for all package errors."""


class SchemaError(CfForestError):
    """Malformed or inconsistent interchange document."""


class InputError(CfForestError):
    """Invalid user input (bad query, unknown target class, bad flags)."""


class InfeasibleIntervalError(CfForestError):
    """An ordinal interval contains no admissible grid value."""


class GridTooLargeError(CfForestError):
    """Oracle enumeration grid exceeds the configured cap."""
