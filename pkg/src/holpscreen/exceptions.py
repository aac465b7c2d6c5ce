"""Shared exception and warning types."""


class DimensionMismatchError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NotPositiveDefiniteError(ValueError):
    """Cholesky factorization hit a non-positive pivot.

    Attributes
    ----------
    pivot : int
        Zero-based index of the failing pivot.
    """

    def __init__(self, message, pivot):
        super().__init__(message)
        self.pivot = pivot


class DegenerateRegimeError(ValueError):
    """An estimator was called outside the regime where it is defined."""


class ConvergenceError(RuntimeError):
    """An iterative routine ran out of its iteration budget.

    Attributes
    ----------
    iterations : int
        Iterations spent before giving up.
    """

    def __init__(self, message, iterations):
        super().__init__(message)
        self.iterations = iterations


class SaturatedFitError(ValueError):
    """The residual sum of squares is zero, so log(RSS/n) is undefined."""


class RankDeficientError(ValueError):
    """A least-squares design submatrix is not of full column rank.

    Attributes
    ----------
    column : int or None
        Index (into the caller's support) of a dependent column.
    """

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class PipelineStageError(RuntimeError):
    """Failure inside a two-stage pipeline, tagged with the stage name."""

    def __init__(self, stage, original):
        super().__init__(f"{stage} stage failed: {original}")
        self.stage = stage
        self.original = original


class ConfigError(ValueError):
    """An experiment configuration file is malformed."""


class IngestError(ValueError):
    """A tabular input file could not be parsed."""


class DegeneracyWarning(UserWarning):
    """Degenerate data was encountered and handled (zero variance, skipped
    model size, skipped fold, empty support)."""
