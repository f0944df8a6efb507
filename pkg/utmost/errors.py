# utmost/errors.py
"""Error families; each carries the kind printed by the CLI."""
from typing import Optional


class UtmostError(Exception):
    """Base class for every error raised by the package."""

    kind = "error"


class ValidationError(UtmostError, ValueError):
    """An input (model, covariance, config field) violates its invariants."""

    kind = "validation"

    def __init__(self, message: str, path: Optional[str] = None):
        self.message = message
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)

    def at(self, path: str) -> "ValidationError":
        """Copy of this error with `path` prepended to its config location."""
        err = type(self).__new__(type(self))
        err.__dict__.update(self.__dict__)
        err.path = f"{path}.{self.path}" if self.path else path
        err.args = (f"{err.path}: {self.message}",)
        return err


class DimensionError(ValidationError):
    kind = "dimension"


class NotPositiveDefiniteError(ValidationError):
    """Raised when the smallest eigenvalue is not safely above zero."""

    kind = "not_positive_definite"

    def __init__(self, eigenvalue: float, largest: float, path: Optional[str] = None):
        self.eigenvalue = float(eigenvalue)
        self.largest = float(largest)
        super().__init__(
            f"noise covariance not positive definite "
            f"(smallest eigenvalue {self.eigenvalue:.6g}, largest {self.largest:.6g})",
            path,
        )


class SolverAbort(UtmostError):
    """Non-finite iterate inside the ADMM loop, or a written result that breaks the row norms."""

    kind = "solver_abort"

    def __init__(self, message: str, iteration: int, inner: Optional[int] = None):
        self.iteration = iteration
        self.inner = inner
        where = f"outer iteration {iteration}"
        if inner is not None:
            where += f", inner iteration {inner}"
        super().__init__(f"{message} ({where})")


class SimulationError(UtmostError):
    kind = "simulation"
