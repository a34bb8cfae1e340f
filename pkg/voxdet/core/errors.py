"""
Exception hierarchy shared by every stage.

The CLI maps each family to its own exit code; library code only raises.
"""


class VoxdetError(Exception):
    """Base class for all toolkit errors."""


class InputFileError(VoxdetError):
    """An input file is missing or unreadable."""

    def __init__(self, path, reason="file not found"):
        self.path = str(path)
        super().__init__(f"{reason}: {self.path}")


class FormatError(VoxdetError):
    """A file exists but its contents are malformed."""

    def __init__(self, message, path=None):
        self.path = str(path) if path is not None else None
        if self.path:
            message = f"{message} ({self.path})"
        super().__init__(message)


class SizeMismatchError(FormatError):
    """Raw payload length disagrees with the header dimensions."""


class UnsupportedVersionError(FormatError):
    """Header names a format or version this build cannot read."""


class ValidationError(VoxdetError):
    """A value violates a documented invariant or precondition."""


class InfeasibleConfigError(VoxdetError):
    """A configuration cannot be satisfied (e.g. object placement)."""


class TrainingDivergedError(VoxdetError):
    """Training produced a non-finite loss."""
