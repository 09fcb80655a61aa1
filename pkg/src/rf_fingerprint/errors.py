"""Shared exception types."""


class RFFingerprintError(Exception):
    """Base class for every error raised by this package."""


class InputError(RFFingerprintError):
    """Bad user-supplied input: file contents, flags, or configuration.

    The CLI maps this family to exit code 2.
    """
