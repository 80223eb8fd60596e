"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError and ShapeError are
configuration problems (1), DataError and its subclasses are data problems
(2), NumericError is a numeric failure (3), VerificationError a failed
property check (4).
"""


class RlprojError(Exception):
    """Base class for all package errors."""


class ConfigError(RlprojError):
    """Invalid or inconsistent run configuration."""


class ShapeError(RlprojError):
    """Operands with incompatible dimensions."""


class DataError(RlprojError):
    """Invalid numeric data, e.g. NaN or Inf where finite values are required."""


class SchemaError(DataError):
    """Tabular file is missing a requested column."""


class ParseError(DataError):
    """Unparseable cell in a tabular file; carries the offending row index."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class FormatError(DataError):
    """Binary image file with an unexpected magic number or layout."""


class DegenerateSplitError(DataError):
    """A split left train or test empty; the caller may retry with a new seed."""


class ExhaustionError(DataError):
    """Batch generation could not find enough distinct batches."""


class NumericError(RlprojError):
    """Non-finite value produced during training or evaluation."""


class BatchSizeMismatch(RlprojError):
    """Paired batches of unequal size; the training loop skips the pair."""


class VerificationError(RlprojError):
    """A property check reported violations."""
