"""Exception types shared across the package."""


class LongRemixError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LongRemixError):
    """A parameter or configuration value is invalid."""


class StateError(LongRemixError):
    """An operation was requested in a state that cannot honor it."""


class ParseError(LongRemixError):
    """A file could not be parsed; carries the offending row when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
