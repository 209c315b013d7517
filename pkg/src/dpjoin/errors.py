"""Exception taxonomy shared across the package.

ValidationError covers malformed inputs (files, arguments, datasets).
PreconditionError covers violated runtime requirements (budget too small,
pin misuse). StoreError covers storage-level failures (corrupt or truncated
files, I/O). The CLI maps each class to a distinct exit code.
"""


class DpjoinError(Exception):
    """Base class for all package errors."""


class ValidationError(DpjoinError):
    """Input data or argument failed validation."""


class PreconditionError(DpjoinError):
    """A documented runtime precondition does not hold."""


class OversizedVectorError(PreconditionError):
    """A single vector needs more pages than the memory budget allows."""

    def __init__(self, message, position=None, tid=None):
        super().__init__(message)
        self.position = position
        self.tid = tid


class StoreError(DpjoinError):
    """Storage-level failure: corrupt header, truncated file, bad I/O."""
