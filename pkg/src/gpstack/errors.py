"""Exception types shared across the package."""


class GpStackError(Exception):
    """Base class for all package-specific errors."""


class InvalidGeometryError(GpStackError, ValueError):
    """Raised for degenerate or self-intersecting polygons."""


class FactorizationError(GpStackError, RuntimeError):
    """Cholesky factorization hit a non-positive pivot.

    Attributes
    ----------
    pivot : int
        Zero-based index of the first failing pivot.
    """

    def __init__(self, pivot, message=None):
        self.pivot = int(pivot)
        super().__init__(message or f"matrix not positive definite at pivot {pivot}")


class FitError(GpStackError, RuntimeError):
    """Candidate model could not be fitted (e.g. factorization failed after max jitter)."""

    def __init__(self, message, spec=None):
        self.spec = spec
        super().__init__(message)


class PredictionError(GpStackError, RuntimeError):
    """Conditional predictive covariance indefinite beyond the jitter budget."""


class RegressionError(GpStackError, RuntimeError):
    """Outcome regression failed, typically due to a collinear design."""

    def __init__(self, message, columns=None):
        self.columns = list(columns) if columns is not None else []
        super().__init__(message)


class ConvergenceError(GpStackError, RuntimeError):
    """Iterative optimizer exceeded its iteration budget.

    Carries the last iterate so callers can inspect or reuse it.
    """

    def __init__(self, message, last_iterate=None):
        self.last_iterate = last_iterate
        super().__init__(message)


class TailTooSmallError(GpStackError, ValueError):
    """Not enough tail points to fit a generalized Pareto distribution."""


class ConfigError(GpStackError, ValueError):
    """Invalid run configuration; message names the offending field path."""


class DataError(GpStackError, ValueError):
    """Malformed or inconsistent input data files."""
