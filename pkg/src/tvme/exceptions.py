"""Exception hierarchy shared by all tvme modules."""


class TvmeError(Exception):
    """Base class for every error raised by tvme."""


class InsufficientDataError(TvmeError, ValueError):
    """Too few observations for the requested computation."""


class DataDomainError(TvmeError, ValueError):
    """Input values outside the domain of the transformation (e.g. non-positive prices)."""


class CsvParseError(TvmeError, ValueError):
    """Malformed CSV input. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FrequencyError(TvmeError, ValueError):
    """Dates are duplicated, unordered or not spaced at the declared frequency."""


class NumericalError(TvmeError, ArithmeticError):
    """Singular or ill-conditioned linear algebra."""


class SingularMultiplierError(NumericalError):
    """``I - A_1 - ... - A_p`` is singular or too ill-conditioned to invert."""
