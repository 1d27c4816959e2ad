"""Exception hierarchy shared by the library and the CLI."""


class ApfaError(Exception):
    """Base class for every error raised by apfa_lab."""


class DataError(ApfaError):
    """Malformed or inconsistent input data."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ModelError(ApfaError):
    """An automaton is invalid or unsuitable for the requested operation."""


class SizeGuardError(ModelError):
    """An operation would create more states than the caller allowed."""


class NotNestedError(ModelError):
    """The second model cannot be reached from the first by state merging."""
