"""Exception hierarchy shared across the package.

Validation-type errors (bad inputs, schema violations) are kept separate
from numerical failures so the CLI can map them to distinct exit codes.
"""


class SurvhrError(Exception):
    """Base class for all package errors."""


class ParseError(SurvhrError):
    """A CSV cell could not be parsed; carries row/column context."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(SurvhrError):
    """Input data violates a documented precondition or invariant."""


class SplitError(ValidationError):
    """A subgroup split is empty or undefined for the given feature."""


class ShapeError(ValidationError):
    """Array dimensions do not match the model's training schema."""


class CapacityError(ValidationError):
    """Problem size exceeds a hard limit of the chosen algorithm."""


class FitError(SurvhrError):
    """Model fitting failed for structural reasons (e.g. singular information)."""


class ConvergenceError(FitError):
    """Iterative fitting did not converge; ``model`` holds the last iterate."""

    def __init__(self, message, model=None):
        super().__init__(message)
        self.model = model


class MetricError(SurvhrError):
    """A metric is undefined on the given data (e.g. no comparable pairs)."""
