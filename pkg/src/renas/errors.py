"""Shared exception base for the package."""


class RenasError(Exception):
    """Base class for all errors raised by this package."""


class IoError(RenasError):
    """Filesystem-level read/write failure."""
