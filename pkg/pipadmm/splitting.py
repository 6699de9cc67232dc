"""Structured instances ``min f(x) + g(y)  s.t.  Ax + By = b`` and iterate state."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from pipadmm.exceptions import InvariantViolationError, ShapeError
from pipadmm.models import SolverConfig, SolveStatus, TraceRecord

LinearMap = Callable[[np.ndarray], np.ndarray]
AcceptFn = Callable[[np.ndarray, np.ndarray], bool]
XOracle = Callable[
    [np.ndarray, np.ndarray, np.ndarray, SolverConfig, AcceptFn],
    tuple[np.ndarray, np.ndarray, int],
]
YProx = Callable[[np.ndarray, np.ndarray, np.ndarray, SolverConfig], np.ndarray]
Triple = tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(frozen=True)
class SplitProblem:
    """A two-block linearly constrained convex problem.

    Parameters
    ----------
    x_dim, y_dim, c_dim : int
        Dimensions of the x-space, the y-space and the constraint space.
    apply_A, apply_At, apply_B, apply_Bt : callable
        The constraint maps and their adjoints.
    b : numpy.ndarray
        Constraint right-hand side.
    x_oracle : callable
        ``(x_prev, y_prev, gamma_prev, config, accept) -> (x_tilde, v, iters)``.
        Must return the first candidate for which ``accept(x_tilde, v)`` holds
        and raise :class:`~pipadmm.exceptions.InnerSolveError` otherwise.
    y_prox : callable
        ``(x_tilde, gamma_prev, y_prev, config) -> y``, the exact minimiser of
        the y-subproblem.
    apply_H : callable, optional
        Self-adjoint positive semidefinite proximal term on y; ``None`` means 0.
    f_value, g_value : callable, optional
        Objective oracles, used for reporting and ergodic certificates.
    g_conjugate : callable, optional
        Fenchel conjugate of g (``inf`` outside its domain).
    """

    x_dim: int
    y_dim: int
    c_dim: int
    apply_A: LinearMap
    apply_At: LinearMap
    apply_B: LinearMap
    apply_Bt: LinearMap
    b: np.ndarray
    x_oracle: XOracle
    y_prox: YProx
    apply_H: LinearMap | None = None
    f_value: Callable[[np.ndarray], float] | None = None
    g_value: Callable[[np.ndarray], float] | None = None
    g_conjugate: Callable[[np.ndarray], float] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if min(self.x_dim, self.y_dim, self.c_dim) < 1:
            raise ShapeError(
                f"dimensions must be positive, got "
                f"({self.x_dim}, {self.y_dim}, {self.c_dim})"
            )
        if np.shape(self.b) != (self.c_dim,):
            raise ShapeError(f"b has shape {np.shape(self.b)}, expected ({self.c_dim},)")

    # ------------------------------------------------------------------
    # Evaluation helpers
    # ------------------------------------------------------------------

    def check_shapes(self, x: np.ndarray, y: np.ndarray, gamma: np.ndarray) -> None:
        expected = ((self.x_dim,), (self.y_dim,), (self.c_dim,))
        for label, vec, shape in zip(("x", "y", "gamma"), (x, y, gamma), expected):
            if np.shape(vec) != shape:
                raise ShapeError(f"{label} has shape {np.shape(vec)}, expected {shape}")

    def constraint_residual(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return ``A x + B y - b``."""
        return self.apply_A(x) + self.apply_B(y) - self.b

    def apply_H_or_zero(self, v: np.ndarray) -> np.ndarray:
        if self.apply_H is None:
            return np.zeros_like(v)
        return self.apply_H(v)

    def objective(self, x: np.ndarray, y: np.ndarray) -> float | None:
        """Return ``f(x) + g(y)`` when both oracles are available."""
        if self.f_value is None or self.g_value is None:
            return None
        return float(self.f_value(x) + self.g_value(y))

    # ------------------------------------------------------------------
    # Invariant checks
    # ------------------------------------------------------------------

    def check_adjoints(
        self, rng: np.random.Generator, trials: int = 3, rtol: float = 1e-10
    ) -> None:
        """Verify ``<A u, w> = <u, A* w>`` (and likewise for B) on random vectors."""
        pairs = (
            ("A", self.apply_A, self.apply_At, self.x_dim),
            ("B", self.apply_B, self.apply_Bt, self.y_dim),
        )
        for label, fwd, adj, dim in pairs:
            for _ in range(trials):
                u = rng.standard_normal(dim)
                w = rng.standard_normal(self.c_dim)
                lhs = float(fwd(u) @ w)
                rhs = float(u @ adj(w))
                scale = np.linalg.norm(fwd(u)) * np.linalg.norm(w) + 1.0
                if abs(lhs - rhs) > rtol * scale:
                    raise InvariantViolationError(
                        f"{label} and its adjoint disagree: {lhs!r} vs {rhs!r}"
                    )

    def check_proximal_term(self, rng: np.random.Generator, trials: int = 3) -> None:
        """Verify that H is symmetric positive semidefinite on random vectors."""
        if self.apply_H is None:
            return
        for _ in range(trials):
            u = rng.standard_normal(self.y_dim)
            w = rng.standard_normal(self.y_dim)
            quad = float(self.apply_H(u) @ u)
            if quad < -1e-12 * float(u @ u):
                raise InvariantViolationError(f"H is not semidefinite: <Hu, u> = {quad!r}")
            lhs = float(self.apply_H(u) @ w)
            rhs = float(u @ self.apply_H(w))
            if abs(lhs - rhs) > 1e-10 * (abs(lhs) + abs(rhs) + 1.0):
                raise InvariantViolationError("H is not self-adjoint")


@dataclass
class Iterate:
    """Full state of the method after ``k`` outer iterations."""

    k: int
    x: np.ndarray
    y: np.ndarray
    gamma: np.ndarray
    x_tilde: np.ndarray
    gamma_tilde: np.ndarray
    v: np.ndarray
    inner_iters: int = 0

    @property
    def z(self) -> Triple:
        return self.x, self.y, self.gamma

    @property
    def z_tilde(self) -> Triple:
        return self.x_tilde, self.y, self.gamma_tilde

    @classmethod
    def start(cls, x0: np.ndarray, y0: np.ndarray, gamma0: np.ndarray) -> Iterate:
        """Iterate 0: the tilde quantities coincide with the start point."""
        x0 = np.asarray(x0, dtype=float).copy()
        gamma0 = np.asarray(gamma0, dtype=float).copy()
        return cls(
            k=0,
            x=x0,
            y=np.asarray(y0, dtype=float).copy(),
            gamma=gamma0,
            x_tilde=x0.copy(),
            gamma_tilde=gamma0.copy(),
            v=np.zeros_like(x0),
        )


@dataclass
class SolveResult:
    final_iterate: Iterate
    outer_count: int
    total_inner_count: int
    trace: list[TraceRecord] = field(default_factory=list)
    status: SolveStatus = SolveStatus.MAX_ITER
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED

    @property
    def final_step_norm(self) -> float | None:
        return self.trace[-1].m_step_norm if self.trace else None
