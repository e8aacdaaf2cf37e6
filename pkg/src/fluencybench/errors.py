"""Exception taxonomy shared across the package.

Every error raised on a user-facing path derives from FluencybenchError so the
CLI can map failures onto stable exit codes without matching on message text.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BACKEND = 4


class FluencybenchError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(FluencybenchError):
    """A run configuration or function specification is unusable."""

    exit_code = EXIT_CONFIG


class DataError(FluencybenchError):
    """A data file or in-memory structure violates its contract."""

    exit_code = EXIT_DATA


class SchemaError(DataError):
    """A delimited file is missing required columns."""


class ParseError(DataError):
    """A row or line could not be parsed; message names the location."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class EmptyDatasetError(DataError):
    """A dataset file contained a header but no usable rows."""


class ValidationError(DataError):
    """A value is structurally fine but semantically out of contract."""


class BackendError(FluencybenchError):
    """A scoring backend is unreachable or replied with garbage."""

    exit_code = EXIT_BACKEND


class RetrievalError(FluencybenchError):
    """A remote lexicon fetch failed and no cache could stand in."""

    exit_code = EXIT_BACKEND
