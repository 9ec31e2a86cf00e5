"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: validation failures exit 3, numerical
failures exit 4, I/O failures (plain OSError) exit 5.
"""


class HetboostError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(HetboostError):
    """Input data or configuration violates a documented contract."""


class SchemaError(ValidationError):
    """Column layout does not match the declared schema."""


class ParseError(ValidationError):
    """A cell could not be parsed; carries row/column context."""

    def __init__(self, message, row=None, column=None):
        if row is not None or column is not None:
            message = f"{message} (row {row}, column {column!r})"
        super().__init__(message)
        self.row = row
        self.column = column


class LabelError(ValidationError):
    """A group label is missing or outside the declared label set."""


class NumericalError(HetboostError):
    """A computation is degenerate (zero variance, rank deficiency,
    normalization over an all-zero scope, ...)."""


class TuningError(HetboostError):
    """Grid search aborted; the message names the offending configuration."""


class IntegrityError(ValidationError):
    """Stored artifacts do not match their manifest hashes."""
