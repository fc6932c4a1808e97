"""Exception types shared across the toolkit.

Every error raised on purpose by this package derives from ToolkitError so
callers (and the CLI) can tell expected failures apart from bugs.
"""


class ToolkitError(Exception):
    """Base class for all errors raised by lidarmocap."""


class InvalidArgumentError(ToolkitError, ValueError):
    """An argument violates a documented precondition."""


class EmptyInputError(InvalidArgumentError):
    """An operation that needs at least one point received none."""


class DegenerateRotationError(ToolkitError, ValueError):
    """A rotation representation cannot be normalized (zero or collinear)."""


class DegenerateRegistrationError(ToolkitError):
    """Point sets do not constrain a rigid transform (collinear/coincident)."""


class NoPeakError(ToolkitError):
    """A height trace contains no detectable jump peak."""


class FormatError(ToolkitError):
    """A file does not conform to its on-disk format.

    The message always names the offending file and, when known, the line
    or record, so batch jobs fail with actionable diagnostics.
    """

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        loc = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{loc}: {message}")


class ConfigError(ToolkitError):
    """A run configuration is missing, unreadable, or inconsistent."""


class SequenceLockedError(ToolkitError):
    """Another writer holds the sequence directory lock."""

