"""Custom exceptions for the crossparse toolkit.

Every error raised on purpose by the library derives from `CrossParseError`.
Subclasses carry a short machine-readable `code` and the process exit status the
CLI uses when the error escapes a subcommand.
"""


class CrossParseError(Exception):
    """Base exception class for crossparse errors.

    Attributes:
        message: Human-readable error description.
        code: Machine-readable error category.
        exit_status: Exit status used by the command-line interface.

    Example:
        >>> raise CrossParseError("no full trees to initialize")
        CrossParseError: no full trees to initialize
    """

    code = "internal"
    exit_status = 4

    def __init__(self, message: str):
        """Initialize the exception with an error message.

        Args:
            message: Human-readable description of the error.
        """
        self.message = message

        super().__init__(self.message)


class UsageError(CrossParseError):
    """Bad command-line flags or a contradictory experiment configuration."""

    code = "usage"
    exit_status = 2


class DataError(CrossParseError):
    """Input data is malformed or violates a data invariant."""

    code = "data"
    exit_status = 3


class TreebankFormatError(DataError):
    """A CoNLL-U or tokenized-text stream could not be parsed.

    Attributes:
        line_no: 1-based line number of the offending line, if known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class TreeError(DataError):
    """A head assignment is not a well-formed dependency tree."""


class AlignmentError(DataError):
    """Alignment links or parallel text are inconsistent."""


class ClusterFormatError(DataError):
    """A cluster file could not be parsed.

    Attributes:
        line_no: 1-based line number of the offending line, if known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ModelFormatError(DataError):
    """A model file has the wrong version or is truncated."""


class TransitionError(CrossParseError):
    """An action was applied where the transition system does not allow it."""
