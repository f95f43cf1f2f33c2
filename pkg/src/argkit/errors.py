"""Shared exception bases. Module-specific errors live with their modules."""

from __future__ import annotations


class ArgkitError(Exception):
    """Base for all typed toolkit errors."""

    exit_code = 1


class InputError(ArgkitError):
    """Malformed files, flags, or payloads supplied by the user."""

    exit_code = 2


class DataError(ArgkitError):
    """Integrity violations inside otherwise well-formed data."""

    exit_code = 3


class BridgeError(ArgkitError):
    """Failures on the out-of-process model wire protocol."""

    exit_code = 4


class LengthMismatch(InputError):
    """Paired inputs whose lengths disagree."""


class VocabMismatch(DataError):
    """Class vocabularies that were required to match do not."""
