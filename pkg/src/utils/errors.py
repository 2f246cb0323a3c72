"""Exception hierarchy for curvemix."""

from typing import Optional


class CurveMixError(Exception):
    """Base class for all curvemix errors."""


# Data problems (exit code 2 in the CLI)


class DataError(CurveMixError, ValueError):
    """Input data cannot be used as given."""


class DataFileNotFound(DataError, FileNotFoundError):
    """A data file does not exist."""


class SchemaMismatch(DataError):
    """CSV header does not contain the mapped columns."""


class ParseError(DataError):
    """A CSV row could not be parsed."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DegenerateAxis(DataError):
    """An axis has zero spread and cannot be normalized."""


class InvalidQuantile(DataError):
    """Quantile outside (0, 1]."""


class DegenerateTargets(DataError):
    """Test targets have zero variance."""


class InvalidSimplex(DataError):
    """Vector is not a probability simplex."""


class WrongDimension(DataError):
    """Vector has the wrong number of components."""


class InsufficientData(DataError):
    """Too few observations for the requested operation."""


# Numerical problems (exit code 3 in the CLI)


class NumericalError(CurveMixError, ArithmeticError):
    """A numerical routine failed."""


class NotPositiveDefinite(NumericalError):
    """Cholesky factorization failed even with maximal jitter."""


class DimensionMismatch(NumericalError, ValueError):
    """Array shapes do not conform."""


class EmptyInput(NumericalError, ValueError):
    """An operation received an empty vector."""


class InvalidHyperparameter(NumericalError, ValueError):
    """A hyperparameter violates its constraint."""


class OptimizationFailed(NumericalError):
    """Every optimizer restart failed."""


# Model files (exit code 2 in the CLI)


class ModelFileError(CurveMixError):
    """A model file cannot be read or written."""


class ModelIoError(ModelFileError, OSError):
    """Filesystem error while reading or writing a model file."""


class SchemaVersionMismatch(ModelFileError):
    """Model file was written with a different schema version."""


class CorruptModel(ModelFileError):
    """Model file content is malformed."""
