"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration errors exit 2, data
errors exit 3, numerical errors exit 4.
"""


class CycleadError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CycleadError):
    """Invalid configuration, spec, or argument combination."""


class SpecError(ConfigurationError):
    """A model or dataset spec violates its invariants."""


class ShapeError(ConfigurationError):
    """Array shapes do not match what an operation requires."""


class DataError(CycleadError):
    """Problems with dataset contents (missing classes, bad files)."""


class ParseError(DataError):
    """A structured file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CalibrationError(DataError):
    """Score sets do not support the requested calibration."""


class NumericalError(CycleadError):
    """A numerical routine failed or produced non-finite values."""
