"""Custom exceptions for the pipadmm package."""

from __future__ import annotations

from pathlib import Path


class PipAdmmError(Exception):
    """Base exception for pipadmm errors."""


class DomainError(PipAdmmError, ValueError):
    """Raised when a scalar parameter lies outside its admissible domain."""


class DegenerateInstanceError(DomainError):
    """Raised when a problem instance is trivially solvable or ill-posed."""


class ShapeError(PipAdmmError, ValueError):
    """Raised when vector or operator dimensions are inconsistent."""


class InnerSolveError(PipAdmmError):
    """Raised when an inner solver fails to produce an acceptable iterate."""

    def __init__(self, iterations: int, reason: str) -> None:
        self.iterations = iterations
        self.reason = reason
        super().__init__(f"Inner solve failed after {iterations} iterations: {reason}")


class CertificateError(PipAdmmError):
    """Raised when a computed certificate contradicts its proven sign or bound."""

    def __init__(self, quantity: str, value: float, message: str = "") -> None:
        self.quantity = quantity
        self.value = value
        detail = f" ({message})" if message else ""
        super().__init__(f"Certificate violated: {quantity} = {value:.6g}{detail}")


class InvariantViolationError(PipAdmmError):
    """Raised when an operator invariant (adjointness, semidefiniteness) fails."""


class DatasetError(PipAdmmError):
    """Raised when a dataset file cannot be parsed or validated."""

    def __init__(self, message: str, path: str | Path = "", line: int | None = None) -> None:
        self.path = str(path)
        self.line = line
        where = self.path
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}" if where else message)
