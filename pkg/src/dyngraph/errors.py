"""Exception types raised across the package."""


class DynGraphError(Exception):
    """Base class for all errors raised by dyngraph."""


class IngestError(DynGraphError, ValueError):
    """A line of the event stream could not be accepted."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateInputError(DynGraphError, ValueError):
    """The input is well formed but the requested quantity is undefined for it."""


class InsufficientDataError(DynGraphError, ValueError):
    """Not enough samples, degrees, or snapshots to compute a statistic."""
