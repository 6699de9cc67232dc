"""Pydantic models for solver configuration, run specifications and reports."""

from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, model_validator


class Method(str, Enum):
    """Outer-loop acceptance rule."""

    PIP = "pip"
    RELERR_BASELINE = "relerr"


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INNER_FAILURE = "inner_failure"


class ProblemKind(str, Enum):
    LASSO = "lasso"
    LOGREG = "logreg"


class DataFormat(str, Enum):
    CSV = "csv"
    SPARSE = "sparse"


class ScalingMode(str, Enum):
    COLUMNS = "columns"
    ROWS = "rows"
    AUTO = "auto"


class EmitFormat(str, Enum):
    TEXT = "text"
    CSV = "csv"
    MARKDOWN = "markdown"


# ----------------------------------------------------------------------
# Solver configuration
# ----------------------------------------------------------------------


class SolverConfig(BaseModel):
    """Parameters of one outer-loop run.

    ``tau1`` left unset resolves to ``default_tau1(theta)`` for the PIP method
    and to ``0.99`` for the relerr baseline.  ``max_inner`` left unset resolves
    to ``10 * x_dim`` when the solver is built.
    """

    beta: float = Field(1.0, gt=0)
    theta: float = Field(1.0, gt=0)
    tau1: float | None = Field(default=None, ge=0, lt=1)
    tau2: float = Field(1.0 - 1e-8, ge=0, lt=1)
    outer_tol: float = Field(1e-2, gt=0)
    max_outer: int = Field(1000, gt=0)
    max_inner: int | None = Field(default=None, gt=0)
    inner_abs_tol: float = Field(1e-8, gt=0)
    method: Method = Method.PIP

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _check_stepsize(self) -> SolverConfig:
        from pipadmm.solver import default_tau1, theta_upper_bound

        if self.method is Method.RELERR_BASELINE:
            if self.theta != 1.0:
                raise ValueError("the relerr baseline runs with theta = 1")
            if self.tau1 is None:
                self.tau1 = 0.99
        elif self.tau1 is None:
            self.tau1 = default_tau1(self.theta)

        bound = theta_upper_bound(self.tau1)
        if self.theta >= bound:
            raise ValueError(
                f"theta={self.theta} must be below {bound:.6f} for tau1={self.tau1}"
            )
        return self

    @property
    def relative_tolerances(self) -> tuple[float, float]:
        """Return the resolved ``(tau1, tau2)`` pair."""
        assert self.tau1 is not None
        return self.tau1, self.tau2

    def inner_budget(self, x_dim: int) -> int:
        return self.max_inner if self.max_inner is not None else 10 * x_dim


# ----------------------------------------------------------------------
# Trace and certificate records
# ----------------------------------------------------------------------


class TraceRecord(BaseModel):
    """One outer iteration as seen by the stopping rule."""

    k: int = Field(ge=1)
    m_step_norm: float = Field(ge=0)
    inner_iters: int = Field(ge=0)
    hpe_slack: float | None = None


class HpeCertificate(BaseModel):
    """Error-condition quantities of one iteration of the HPE embedding."""

    sigma: float = Field(ge=0, lt=1)
    mu: float = Field(ge=0)
    eta_prev: float = Field(ge=0)
    eta_curr: float = Field(ge=0)
    slack: float
    scale: float = Field(default=1.0, ge=0)

    @property
    def holds(self) -> bool:
        return self.slack >= -1e-8 * self.scale


class ErgodicReport(BaseModel):
    k: int = Field(ge=1)
    r_a_norm: float = Field(ge=0)
    eps_x: float
    eps_y: float
    eps_combined: float
    residual_bound: float
    eps_bound: float
    feasibility_gap: float = Field(ge=0)
    feasibility_scale: float = Field(default=1.0, ge=0)


class CertificateRow(BaseModel):
    """Per-iteration certificate report row (CSV/JSON serialisable)."""

    k: int = Field(ge=1)
    slack: float
    slack_scale: float
    eta: float
    best_step_norm: float
    pointwise_bound: float
    r_a_norm: float
    ergodic_bound: float
    eps_x: float
    eps_y: float
    eps_combined: float
    eps_bound: float
    feasibility_gap: float
    feasibility_scale: float


# ----------------------------------------------------------------------
# Instance generation
# ----------------------------------------------------------------------


class RandomLassoSpec(BaseModel):
    """Seeded random LASSO instance: ``d = C x + noise_scale * y``."""

    m: int = Field(ge=1)
    n: int = Field(ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    sparsity: int = Field(100, ge=0)
    noise_scale: float = Field(math.sqrt(0.001), ge=0)

    @model_validator(mode="after")
    def _check_sparsity(self) -> RandomLassoSpec:
        if self.sparsity > self.n:
            raise ValueError(f"sparsity={self.sparsity} exceeds n={self.n}")
        return self


class RandomLogRegSpec(BaseModel):
    """Seeded random logistic instance with labels ``sign(C w + noise)``."""

    m: int = Field(ge=2)
    n: int = Field(ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    sparsity: int = Field(10, ge=0)
    noise_scale: float = Field(0.1, ge=0)

    @model_validator(mode="after")
    def _check_sparsity(self) -> RandomLogRegSpec:
        if self.sparsity > self.n:
            raise ValueError(f"sparsity={self.sparsity} exceeds n={self.n}")
        return self


# ----------------------------------------------------------------------
# Benchmark harness
# ----------------------------------------------------------------------


class RunSpec(BaseModel):
    """A batch of solves over one instance source."""

    problem: ProblemKind = ProblemKind.LASSO
    random: tuple[int, int] | None = None
    dataset: Path | None = None
    data_format: DataFormat = DataFormat.CSV
    label_column: int | str | None = -1
    header: bool = False
    seed: int = Field(0, ge=0)
    reps: int = Field(1, ge=1)
    methods: list[tuple[Method, float]] = Field(
        default_factory=lambda: [(Method.PIP, 1.0)]
    )
    overrides: dict[str, Any] = Field(default_factory=dict)
    output: Path | None = None
    certify: bool = False

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def _check_source_and_methods(self) -> RunSpec:
        from pipadmm.solver import default_tau1, theta_upper_bound

        if (self.random is None) == (self.dataset is None):
            raise ValueError("exactly one of random or dataset must be given")
        if self.random is not None and min(self.random) < 1:
            raise ValueError(f"random dimensions must be positive: {self.random}")
        if not self.methods:
            raise ValueError("at least one method is required")
        for method, theta in self.methods:
            if method is Method.RELERR_BASELINE:
                if theta != 1.0:
                    raise ValueError("the relerr baseline runs with theta = 1")
                continue
            if not theta < theta_upper_bound(default_tau1(theta)):
                raise ValueError(f"theta={theta} violates the stepsize condition")
        return self


class BenchRow(BaseModel):
    """One solve of a benchmark batch; field order is the CSV column order."""

    dataset: str
    method: Method
    theta: float
    outer: int = Field(ge=0)
    inner: int = Field(ge=0)
    time: float = Field(ge=0)
    objective: float | None = None
    m_step_norm: float | None = None
    status: str = SolveStatus.CONVERGED.value
    seed: int | None = None

    @property
    def failed(self) -> bool:
        return self.status not in (
            SolveStatus.CONVERGED.value,
            SolveStatus.MAX_ITER.value,
        )


class BenchSummary(BaseModel):
    """Out/Inner statistics of one (dataset, method, theta) over repetitions."""

    dataset: str
    method: Method
    theta: float
    reps: int = Field(ge=1)
    out_mean: float
    out_min: int
    out_max: int
    inner_mean: float
    inner_min: int
    inner_max: int
    time_mean: float
