"""Exception taxonomy shared by all modules.

Data/validation problems (bad input files, malformed spans, corrupt model
files) derive from DataError so the CLI can map them to a single exit code.
"""


class TeigoError(Exception):
    """Base class for all toolkit errors."""


class DataError(TeigoError):
    """Any problem caused by the data handed to the toolkit."""


class ValidationError(DataError):
    """A value violates an invariant (span bounds, tag validity, ...)."""


class FormatError(DataError):
    """A file or byte stream is not in the expected format."""


class ParseError(FormatError):
    """Malformed markup; carries the position where parsing failed."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class SchemaError(DataError):
    """Well-formed input that violates the document schema."""


class IntegrityError(FormatError):
    """A binary payload is truncated or internally inconsistent."""


class TrainingError(TeigoError):
    """Training aborted (non-finite loss, empty inputs, ...)."""
