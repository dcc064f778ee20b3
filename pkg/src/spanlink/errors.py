"""Exception hierarchy.

Two branches matter for CLI exit codes: ``InputError`` covers bad
configuration and malformed input files (exit 2), ``PipelineError`` covers
failures while processing otherwise well-formed inputs (exit 1).
"""


class SpanlinkError(Exception):
    """Base class for all package errors."""


class InputError(SpanlinkError):
    """Bad configuration, missing files, or malformed input data."""


class PipelineError(SpanlinkError):
    """Runtime failure inside the linking or training pipeline."""


class ConfigError(InputError):
    """Invalid configuration value (window <= overlap, k > vocabulary size, ...)."""


class EmptyVocabularyError(InputError):
    """Vocabulary construction received no entries."""


class UnknownEntityError(InputError):
    """Entity identifier not present in the active vocabulary."""


class OffsetError(InputError):
    """Character offsets out of range for the text they index."""


class ParseError(InputError):
    """Malformed record in a corpus, store, or annotation file."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MatrixFormatError(InputError):
    """Corrupt or mismatched binary matrix file."""


class QuotaError(ConfigError):
    """Negative-example quota cannot be satisfied by the vocabulary."""


class ShapeError(PipelineError):
    """Array dimensions do not match the operation's contract."""


class DegenerateBatchError(PipelineError):
    """Loss evaluation over an empty selected-example set."""


class DivergenceError(PipelineError):
    """Training produced a non-finite loss."""


class AlignmentError(InputError):
    """Predicted document id has no gold counterpart."""


class NifError(InputError):
    """Base class for annotation wire-format errors."""


class NifParseError(NifError):
    """Request body is not parseable in the supported Turtle subset."""


class NifProtocolError(NifError):
    """Parseable body that violates the annotation protocol contract."""
