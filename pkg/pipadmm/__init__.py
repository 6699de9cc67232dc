"""Partially inexact proximal ADMM with runtime HPE certificates."""

from pipadmm.exceptions import (
    CertificateError,
    DatasetError,
    DegenerateInstanceError,
    DomainError,
    InnerSolveError,
    InvariantViolationError,
    PipAdmmError,
    ShapeError,
)
from pipadmm.models import Method, RandomLassoSpec, RandomLogRegSpec, SolverConfig, SolveStatus
from pipadmm.monitor import HpeMonitor
from pipadmm.problems import lasso_problem, logreg_problem
from pipadmm.solver import PipAdmmSolver, reference_solution, run
from pipadmm.splitting import Iterate, SolveResult, SplitProblem

__all__ = [
    "PipAdmmSolver",
    "SplitProblem",
    "Iterate",
    "SolveResult",
    "SolverConfig",
    "Method",
    "SolveStatus",
    "RandomLassoSpec",
    "RandomLogRegSpec",
    "HpeMonitor",
    "lasso_problem",
    "logreg_problem",
    "run",
    "reference_solution",
    "PipAdmmError",
    "DomainError",
    "DegenerateInstanceError",
    "ShapeError",
    "InnerSolveError",
    "CertificateError",
    "InvariantViolationError",
    "DatasetError",
]
