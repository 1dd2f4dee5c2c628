class LcbError(Exception):
    """Base class for package errors."""


class ConfigError(LcbError, ValueError):
    """Invalid configuration; CLI exit code 2."""


class DataError(LcbError):
    """Missing or malformed input data; CLI exit code 3."""
