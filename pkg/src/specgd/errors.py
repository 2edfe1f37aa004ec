"""Exception taxonomy shared by the core engine, the service, and the CLI.

Every error carries a ``kind`` that maps to a CLI exit code and to the
``error.kind`` field of service responses.
"""


class SpecgdError(Exception):
    kind = "config"

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details


class ConfigError(SpecgdError):
    """Bad flags, invalid arguments, structural misuse of an API."""

    kind = "config"


class DataFormatError(SpecgdError):
    """Unparseable input data; carries ``line=`` when known."""

    kind = "parse"


class DataIOError(SpecgdError):
    """Missing, unreadable, unwritable, or corrupted dataset files."""

    kind = "io"


class NumericError(SpecgdError):
    """Non-finite values where finite ones are required."""

    kind = "numeric"


class StepFailureError(NumericError):
    """Line search exhausted its backtracking budget."""


EXIT_CODES = {"config": 2, "io": 3, "parse": 4, "numeric": 5}


def exit_code_for(err: SpecgdError) -> int:
    return EXIT_CODES.get(err.kind, 1)
