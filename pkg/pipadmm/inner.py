"""Inner solvers for the x-subproblem, driven by an acceptance callback.

Both solvers evaluate ``accept`` exactly once per iterate (the start point
included) and return the first accepted iterate together with its
certificate vector ``v`` and the number of iterations performed.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator

from pipadmm.exceptions import InnerSolveError
from pipadmm.splitting import AcceptFn, LinearMap

logger = logging.getLogger(__name__)

RESIDUAL_REFRESH = 50
ARMIJO = 1e-4
BACKTRACK_FACTOR = 0.5
MAX_HALVINGS = 50
# Armijo acceptance allows h to rise by ROUNDOFF_SLACK * eps * |h(x)|.
ROUNDOFF_SLACK = 4.0
DENSE_THRESHOLD = 2000

HessianLike = np.ndarray | LinearOperator


# ----------------------------------------------------------------------
# Conjugate gradient
# ----------------------------------------------------------------------


@dataclass
class CgWorkspace:
    """State of a CG run on ``S x = rhs``; ``r`` is the classical residual ``rhs - S x``."""

    apply_S: LinearMap
    rhs: np.ndarray
    x: np.ndarray
    r: np.ndarray = field(init=False)
    p: np.ndarray = field(init=False)
    rs: float = field(init=False)
    iterations: int = 0

    def __post_init__(self) -> None:
        self.x = np.array(self.x, dtype=float)
        self.r = self.true_residual()
        self.p = self.r.copy()
        self.rs = float(self.r @ self.r)

    def true_residual(self) -> np.ndarray:
        return self.rhs - self.apply_S(self.x)

    @property
    def v(self) -> np.ndarray:
        """Certificate vector ``S x - rhs``."""
        return -self.r

    def advance(self) -> None:
        sp = self.apply_S(self.p)
        curvature = float(self.p @ sp)
        if curvature <= 0.0:
            raise InnerSolveError(self.iterations, f"non-positive curvature {curvature:.3e}")
        alpha = self.rs / curvature
        self.x = self.x + alpha * self.p
        self.r = self.r - alpha * sp
        self.iterations += 1
        if self.iterations % RESIDUAL_REFRESH == 0:
            self._refresh_residual()
        rs_new = float(self.r @ self.r)
        self.p = self.r + (rs_new / self.rs) * self.p
        self.rs = rs_new

    def _refresh_residual(self) -> None:
        exact = self.true_residual()
        drift = float(np.linalg.norm(exact - self.r))
        if drift > 1e-10 * (float(np.linalg.norm(self.rhs)) + float(np.linalg.norm(exact))):
            logger.debug("CG residual drift %.3e at iteration %d; refreshed", drift, self.iterations)
        self.r = exact


def cg_solve(
    apply_S: LinearMap,
    rhs: np.ndarray,
    x_start: np.ndarray,
    accept: AcceptFn,
    max_inner: int,
    on_iterate: Callable[[CgWorkspace], None] | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Conjugate gradient on a symmetric positive definite system.

    Parameters
    ----------
    apply_S : callable
        The SPD operator.
    rhs, x_start : numpy.ndarray
        Right-hand side and starting point.
    accept : callable
        ``accept(x, v)`` with ``v = S x - rhs``.
    max_inner : int
        Maximum number of CG steps.
    on_iterate : callable, optional
        Called with the workspace after every iterate (debug hook).

    Returns
    -------
    tuple
        ``(x_tilde, v, iterations)`` for the first accepted iterate.

    Raises
    ------
    InnerSolveError
        If no iterate is accepted within ``max_inner`` steps or CG breaks down.
    """
    ws = CgWorkspace(apply_S, np.asarray(rhs, dtype=float), x_start)
    while True:
        if on_iterate is not None:
            on_iterate(ws)
        v = ws.v
        if accept(ws.x, v):
            logger.debug("CG accepted after %d iterations", ws.iterations)
            return ws.x, v, ws.iterations
        if ws.iterations >= max_inner:
            raise InnerSolveError(ws.iterations, "CG budget exhausted")
        ws.advance()


# ----------------------------------------------------------------------
# Damped Newton
# ----------------------------------------------------------------------


@dataclass
class NewtonWorkspace:
    """State of a damped Newton run on a smooth strongly convex ``h``."""

    fun: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], HessianLike]
    x: np.ndarray
    dense_threshold: int = DENSE_THRESHOLD
    iterations: int = 0
    last_step: float = 1.0
    values: list[float] = field(default_factory=list)

    def direction(self, g: np.ndarray) -> np.ndarray:
        """Solve ``hess(x) d = -g``."""
        hessian = self.hess(self.x)
        if isinstance(hessian, np.ndarray) and hessian.shape[0] <= self.dense_threshold:
            try:
                factor = cho_factor(hessian, lower=True, check_finite=False)
            except LinAlgError as exc:
                raise InnerSolveError(self.iterations, "Hessian is not positive definite") from exc
            return -cho_solve(factor, g, check_finite=False)

        matvec = hessian.dot if isinstance(hessian, np.ndarray) else hessian.matvec
        g_norm = float(np.linalg.norm(g))
        d, _, _ = cg_solve(
            lambda p: matvec(p),
            -g,
            np.zeros_like(g),
            lambda _x, r: float(np.linalg.norm(r)) <= 1e-10 * g_norm,
            10 * g.size,
        )
        return d

    def line_search(self, d: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Armijo backtracking from the full step.

        A step is taken when ``h(x + t d) <= h(x) + ARMIJO t <g, d> + floor``
        with ``floor = ROUNDOFF_SLACK * eps * |h(x)|``.  Near the minimizer the
        Armijo decrease falls below the rounding error of evaluating h, so the
        accepted values are nonincreasing only up to that floor; any larger
        increase is rejected.
        """
        h0 = self.fun(self.x)
        slope = float(g @ d)
        if slope >= 0.0:
            raise InnerSolveError(self.iterations, "Newton direction is not a descent direction")
        floor = ROUNDOFF_SLACK * np.finfo(float).eps * abs(h0)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = self.x + t * d
            h_new = self.fun(candidate)
            if h_new <= h0 + ARMIJO * t * slope + floor:
                self.last_step = t
                self.values.append(h_new)
                return candidate
            t *= BACKTRACK_FACTOR
        raise InnerSolveError(self.iterations, f"no decrease after {MAX_HALVINGS} halvings")


def newton_solve(
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], HessianLike],
    x_start: np.ndarray,
    accept: AcceptFn,
    max_inner: int,
    *,
    fun: Callable[[np.ndarray], float],
    dense_threshold: int = DENSE_THRESHOLD,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Damped Newton method with the certificate ``v = grad h(x~)``.

    ``hess`` may return a dense matrix or a
    :class:`scipy.sparse.linalg.LinearOperator`; Newton systems above
    ``dense_threshold`` unknowns are solved by CG.

    Raises
    ------
    InnerSolveError
        On line-search failure or when ``max_inner`` steps pass without
        acceptance.
    """
    ws = NewtonWorkspace(fun, grad, hess, np.array(x_start, dtype=float), dense_threshold)
    ws.values.append(fun(ws.x))
    g = grad(ws.x)
    while True:
        if accept(ws.x, g):
            logger.debug("Newton accepted after %d iterations", ws.iterations)
            return ws.x, g, ws.iterations
        if ws.iterations >= max_inner:
            raise InnerSolveError(ws.iterations, "Newton budget exhausted")
        d = ws.direction(g)
        ws.x = ws.line_search(d, g)
        ws.iterations += 1
        g = grad(ws.x)
