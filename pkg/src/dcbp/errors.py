"""Exception hierarchy shared by every module."""

from __future__ import annotations


class DcbpError(Exception):
    """Base class for all package errors."""


class ModelError(DcbpError, ValueError):
    """Invalid model structure or malformed model input."""

    def __init__(self, message: str, violations: list | None = None) -> None:
        super().__init__(message)
        self.violations = list(violations or [])


class ArgumentError(DcbpError, ValueError):
    """Bad argument: dimension mismatch, out-of-range index, duplicate values."""


class DegenerateSpectrumError(DcbpError, ArithmeticError):
    """Two rates that must be distinct are closer than the distinctness threshold."""


class NotPositiveRegularError(DcbpError, ValueError):
    """Matrix is reducible, so Perron-Frobenius data is not unique."""


class SingularityError(DcbpError, ArithmeticError):
    """A matrix that must be inverted is (numerically) singular."""


class NotMMatrixError(DcbpError, ValueError):
    """The shift does not dominate the spectrum, so the inverse need not be nonnegative."""


class ConvergenceError(DcbpError, RuntimeError):
    """An iterative solver hit its iteration cap.

    ``last`` holds the final iterate and ``residual`` its sup-norm residual.
    """

    def __init__(self, message: str, last=None, residual: float = float("nan"), iterations: int = 0) -> None:
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.iterations = iterations


class DegenerateEnsembleError(DcbpError, RuntimeError):
    """Every replication of an ensemble was excluded (event cap)."""
