"""The partially inexact proximal ADMM outer loop.

Each outer iteration

1. asks the problem's x-oracle for a pair ``(x~, v)`` with
   ``v in df(x~) - A* gamma~`` that passes the hybrid acceptance rule,
2. solves the y-subproblem exactly,
3. takes the extragradient step ``x = x_prev - beta v`` and the multiplier
   step ``gamma = gamma_prev - theta beta (A x~ + B y - b)``.

The same loop with ``theta = 1``, ``H = 0`` and the acceptance test swapped
gives the relative-error ADMM baseline.
"""

from __future__ import annotations

import csv
import logging
import math
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from pipadmm.exceptions import DomainError, InnerSolveError
from pipadmm.models import Method, SolverConfig, SolveStatus, TraceRecord
from pipadmm.monitor import MSeminorm, m_seminorm, triple_diff
from pipadmm.splitting import AcceptFn, Iterate, SolveResult, SplitProblem, Triple

if TYPE_CHECKING:
    from pipadmm.monitor import HpeMonitor

logger = logging.getLogger(__name__)

_EPS = float(np.finfo(float).eps)


# ----------------------------------------------------------------------
# Parameter rules
# ----------------------------------------------------------------------


def theta_upper_bound(tau1: float) -> float:
    """Largest admissible stepsize (exclusive) for a given ``tau1``.

    Examples
    --------
    >>> round(theta_upper_bound(0.0), 6)
    1.618034
    """
    if not 0.0 <= tau1 < 1.0:
        raise DomainError(f"tau1 must lie in [0, 1), got {tau1}")
    a = 1.0 - 2.0 * tau1
    return (a + math.sqrt(a * a + 4.0 * (1.0 - tau1))) / (2.0 * (1.0 - tau1))


def default_tau1(theta: float) -> float:
    """The experiments' choice ``0.99 (1 + theta - theta^2) / (theta (2 - theta))``."""
    if not 0.0 < theta < 2.0:
        raise DomainError(f"theta must lie in (0, 2), got {theta}")
    numerator = 1.0 + theta - theta * theta
    if numerator <= 0.0:
        raise DomainError(f"theta={theta} is not below the golden ratio")
    tau1 = 0.99 * numerator / (theta * (2.0 - theta))
    if tau1 >= 1.0:
        raise DomainError(f"theta={theta} gives tau1={tau1:.6g} >= 1; pass tau1 explicitly")
    if not theta < theta_upper_bound(tau1):
        raise DomainError(f"theta={theta} violates the stepsize condition for tau1={tau1}")
    return tau1


# ----------------------------------------------------------------------
# Acceptance tests
# ----------------------------------------------------------------------


def gamma_tilde(
    gamma_prev: np.ndarray,
    x_tilde: np.ndarray,
    y_prev: np.ndarray,
    problem: SplitProblem,
    beta: float,
) -> np.ndarray:
    """Return ``gamma_prev - beta (A x~ + B y_prev - b)``."""
    if beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    problem.check_shapes(x_tilde, y_prev, gamma_prev)
    return gamma_prev - beta * problem.constraint_residual(x_tilde, y_prev)


def relative_error_holds(
    x_tilde: np.ndarray,
    x_prev: np.ndarray,
    v: np.ndarray,
    gamma_tilde: np.ndarray,
    gamma_prev: np.ndarray,
    beta: float,
    tau1: float,
    tau2: float,
    *,
    roundoff: float = 0.0,
) -> bool:
    """``|x~ - x_prev + beta v|^2 <= tau1 |gamma~ - gamma_prev|^2 + tau2 |x~ - x_prev|^2``.

    ``roundoff`` is added to the right-hand side; the solver passes a
    floating-point floor so that exact oracles are accepted with
    ``tau1 = tau2 = 0``.
    """
    dx = x_tilde - x_prev
    lhs_vec = dx + beta * v
    dg = gamma_tilde - gamma_prev
    lhs = float(lhs_vec @ lhs_vec)
    rhs = tau1 * float(dg @ dg) + tau2 * float(dx @ dx)
    return lhs <= rhs + roundoff


def relerr_baseline_holds(
    x_tilde: np.ndarray,
    x_prev: np.ndarray,
    v: np.ndarray,
    gamma_tilde: np.ndarray,
    gamma_prev: np.ndarray,
    beta: float,
    tau1: float,
) -> bool:
    """``2 beta |<x~ - x_prev, v>| + beta^2 |v|^2 <= tau1 |gamma~ - gamma_prev|^2``."""
    dg = gamma_tilde - gamma_prev
    lhs = 2.0 * beta * abs(float((x_tilde - x_prev) @ v)) + beta * beta * float(v @ v)
    return lhs <= tau1 * float(dg @ dg)


def _roundoff_floor(x_tilde: np.ndarray, x_prev: np.ndarray, v: np.ndarray, beta: float) -> float:
    magnitude = float(np.linalg.norm(x_tilde) + np.linalg.norm(x_prev) + beta * np.linalg.norm(v))
    return (8.0 * _EPS * magnitude) ** 2


# ----------------------------------------------------------------------
# Solver
# ----------------------------------------------------------------------


class PipAdmmSolver:
    """Outer loop bound to one problem and one configuration.

    Parameters
    ----------
    problem : SplitProblem
        The structured instance.
    config : SolverConfig
        Validated parameters; ``config.method`` selects the acceptance test.

    Examples
    --------
    >>> solver = PipAdmmSolver(problem, SolverConfig(theta=1.6))
    >>> result = solver.run()
    >>> result.status, result.outer_count
    """

    def __init__(self, problem: SplitProblem, config: SolverConfig) -> None:
        if config.method is Method.RELERR_BASELINE and problem.apply_H is not None:
            raise DomainError("the relerr baseline requires H = 0")
        self.problem = problem
        self.config = config
        self.metric = MSeminorm.for_problem(problem, config)

    # ------------------------------------------------------------------
    # Iteration
    # ------------------------------------------------------------------

    def initial_iterate(self, start: Triple | None = None) -> Iterate:
        """Iterate 0 from ``start`` (zeros when omitted)."""
        p = self.problem
        if start is None:
            start = (np.zeros(p.x_dim), np.zeros(p.y_dim), np.zeros(p.c_dim))
        p.check_shapes(*start)
        return Iterate.start(*start)

    def acceptance(self, x_prev: np.ndarray, y_prev: np.ndarray, gamma_prev: np.ndarray) -> AcceptFn:
        """Hybrid rule: the configured relative-error test or ``|v| <= inner_abs_tol``."""
        cfg = self.config
        tau1, tau2 = cfg.relative_tolerances

        def accept(x_tilde: np.ndarray, v: np.ndarray) -> bool:
            if float(np.linalg.norm(v)) <= cfg.inner_abs_tol:
                return True
            gt = gamma_tilde(gamma_prev, x_tilde, y_prev, self.problem, cfg.beta)
            if cfg.method is Method.RELERR_BASELINE:
                return relerr_baseline_holds(x_tilde, x_prev, v, gt, gamma_prev, cfg.beta, tau1)
            return relative_error_holds(
                x_tilde, x_prev, v, gt, gamma_prev, cfg.beta, tau1, tau2,
                roundoff=_roundoff_floor(x_tilde, x_prev, v, cfg.beta),
            )

        return accept

    def step(self, state: Iterate) -> Iterate:
        """Advance ``state`` (iterate k-1) to iterate k.

        Raises
        ------
        InnerSolveError
            If the x-oracle exhausts its budget without acceptance.
        """
        p, cfg = self.problem, self.config
        x_prev, y_prev, g_prev = state.x, state.y, state.gamma
        accept = self.acceptance(x_prev, y_prev, g_prev)

        x_tilde, v, iters = p.x_oracle(x_prev, y_prev, g_prev, cfg, accept)
        g_tilde = gamma_tilde(g_prev, x_tilde, y_prev, p, cfg.beta)
        y = p.y_prox(x_tilde, g_prev, y_prev, cfg)
        x = x_prev - cfg.beta * v
        gamma = g_prev - cfg.theta * cfg.beta * p.constraint_residual(x_tilde, y)
        return Iterate(
            k=state.k + 1,
            x=x,
            y=y,
            gamma=gamma,
            x_tilde=x_tilde,
            gamma_tilde=g_tilde,
            v=v,
            inner_iters=iters,
        )

    def run(self, start: Triple | None = None, monitor: HpeMonitor | None = None) -> SolveResult:
        """Iterate until the M-seminorm step is at most ``outer_tol``.

        An attached ``monitor`` observes every pair of consecutive iterates
        and its slack is written into the trace; it never alters the iterates.
        """
        cfg = self.config
        state = self.initial_iterate(start)
        trace: list[TraceRecord] = []
        total_inner = 0
        status = SolveStatus.MAX_ITER
        message = ""
        logger.info(
            "Solving %s: method=%s beta=%g theta=%g tau1=%.6g tau2=%.6g",
            self.problem.name or "problem", cfg.method.value, cfg.beta, cfg.theta,
            *cfg.relative_tolerances,
        )

        for _ in range(cfg.max_outer):
            try:
                nxt = self.step(state)
            except InnerSolveError as exc:
                status = SolveStatus.INNER_FAILURE
                message = str(exc)
                logger.warning("Iteration %d: %s", state.k + 1, exc)
                break

            total_inner += nxt.inner_iters
            step_norm = m_seminorm(triple_diff(state.z, nxt.z), self.metric)
            slack = monitor.observe(state, nxt).slack if monitor is not None else None
            trace.append(
                TraceRecord(k=nxt.k, m_step_norm=step_norm, inner_iters=nxt.inner_iters, hpe_slack=slack)
            )
            logger.debug("k=%d  m_step=%.3e  inner=%d", nxt.k, step_norm, nxt.inner_iters)
            state = nxt
            if step_norm <= cfg.outer_tol:
                status = SolveStatus.CONVERGED
                break

        logger.info(
            "Finished with status=%s after %d outer / %d inner iterations",
            status.value, state.k, total_inner,
        )
        return SolveResult(
            final_iterate=state,
            outer_count=state.k,
            total_inner_count=total_inner,
            trace=trace,
            status=status,
            message=message,
        )


# ----------------------------------------------------------------------
# Functional wrappers
# ----------------------------------------------------------------------


def step(state: Iterate, problem: SplitProblem, config: SolverConfig) -> Iterate:
    return PipAdmmSolver(problem, config).step(state)


def run(
    problem: SplitProblem,
    config: SolverConfig,
    start: Triple | None = None,
    monitor: HpeMonitor | None = None,
) -> SolveResult:
    return PipAdmmSolver(problem, config).run(start, monitor=monitor)


def reference_solution(
    problem: SplitProblem,
    config: SolverConfig,
    start: Triple | None = None,
    outer_tol: float = 1e-8,
    max_outer: int = 20_000,
) -> Iterate:
    """High-accuracy solve used to estimate the distance to the solution set.

    The returned iterate carries ``x~`` in its x block.  The extragradient
    iterate ``x`` only moves by ``beta v`` and stays at its start when the
    x-oracle solves exactly, so ``(x~, y, gamma)`` is the saddle-point
    estimate; at convergence ``A x~ + B y = b`` up to the tolerance.
    """
    tight = config.model_copy(
        update={"outer_tol": outer_tol, "max_outer": max(config.max_outer, max_outer)}
    )
    result = PipAdmmSolver(problem, tight).run(start)
    if result.status is SolveStatus.INNER_FAILURE:
        raise InnerSolveError(result.outer_count, f"reference solve failed: {result.message}")
    if not result.converged:
        logger.warning(
            "Reference solve stopped at M-step %.3e after %d iterations",
            result.final_step_norm or math.nan, result.outer_count,
        )
    final = result.final_iterate
    logger.info(
        "Reference solve: %d outer iterations, constraint residual %.3e",
        result.outer_count,
        float(np.linalg.norm(problem.constraint_residual(final.x_tilde, final.y))),
    )
    return replace(final, x=final.x_tilde.copy())


def write_trace_csv(trace: Sequence[TraceRecord], path: str | Path) -> None:
    """One row per outer iteration: ``k, m_step_norm, inner_iters, hpe_slack``."""
    fields = list(TraceRecord.model_fields)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for record in trace:
            dumped = record.model_dump()
            writer.writerow(["" if dumped[f] is None else dumped[f] for f in fields])
