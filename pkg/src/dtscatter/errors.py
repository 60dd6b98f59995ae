"""Exception types shared across the package."""


class DtscatterError(Exception):
    """Base class for all errors raised by dtscatter."""


class ParameterError(DtscatterError, ValueError):
    """An argument or configuration value is out of its valid range."""


class ShapeError(DtscatterError, ValueError):
    """Array dimensions are incompatible with the requested operation."""


class FormatError(DtscatterError):
    """A file does not follow its documented on-disk format."""


class FilterParseError(FormatError):
    """A coefficient file is malformed.  ``line`` is 1-based, or None."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FilterIntegrityError(DtscatterError):
    """A filter set fails its perfect-reconstruction self-check."""


class DataError(DtscatterError, ValueError):
    """Input data contains values the numerics cannot accept (NaN, Inf)."""


class DivergenceError(DtscatterError, ArithmeticError):
    """Training loss blew up; ``history`` holds the per-epoch losses so far."""

    def __init__(self, message, history=()):
        self.history = list(history)
        super().__init__(message)
