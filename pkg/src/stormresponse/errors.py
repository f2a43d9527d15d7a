"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class StormResponseError(Exception):
    """Base class for all package errors."""


class ConfigError(StormResponseError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class DataError(StormResponseError):
    """Invalid, missing or malformed input data (CLI exit code 3)."""


class NumericalError(StormResponseError):
    """Optimisation or numerical procedure failed (CLI exit code 4)."""
