"""Exception hierarchy shared by all toolkit modules.

Two broad families matter for the CLI exit-code contract: ``ParseError``
covers malformed input bytes/text (exit code 3), ``DataError`` covers
semantically invalid but well-formed data (exit code 1).
"""

from __future__ import annotations


class OmafToolkitError(Exception):
    """Base class for all errors raised by this package."""

    code = "ERROR"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ParseError(OmafToolkitError):
    """Input could not be decoded (binary container, XML, CSV, raster ...)."""

    code = "PARSE_ERROR"


class DataError(OmafToolkitError):
    """Well-formed input that violates a documented constraint."""

    code = "DATA_ERROR"


class UsageError(OmafToolkitError):
    """An operation was invoked with arguments outside its contract."""

    code = "USAGE_ERROR"
