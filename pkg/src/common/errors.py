"""Exception hierarchy shared by every package.

Value-type problems (bad shapes, invalid constants, violated preconditions)
subclass ``ValueError``; problems that only show up while running (divergence,
an evaluation with nothing left to compare) subclass ``RuntimeError``.
"""


class SdfRenderError(Exception):
    """Base class for all errors raised by this project."""


class ShapeError(SdfRenderError, ValueError):
    """Array dimensions do not match what an operation expects."""


class ParameterError(SdfRenderError, ValueError):
    """A constant is outside its valid range (alpha <= 0, radius <= 0, N = 0, ...)."""


class PreconditionError(SdfRenderError, ValueError):
    """An input violates an operation's precondition (empty batch, non-unit direction, ...)."""


class FormatError(SdfRenderError, ValueError):
    """A file does not follow the expected binary or text layout."""


class TrainingError(SdfRenderError, RuntimeError):
    """Fitting diverged. The loss history up to the failure is attached."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class EvaluationError(SdfRenderError, RuntimeError):
    """An evaluation has nothing left to measure (e.g. every ray was filtered)."""
