"""LASSO and l1-regularised logistic regression as split problems.

Both problems use the splitting ``A = -I``, ``B = I``, ``b = 0`` (the
constraint reads ``y - x = 0``), with the smooth loss on x and the l1 term
on y.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from scipy import sparse
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator
from scipy.special import expit

from pipadmm.exceptions import DegenerateInstanceError, DomainError, InnerSolveError, ShapeError
from pipadmm.inner import DENSE_THRESHOLD, cg_solve, newton_solve
from pipadmm.models import SolverConfig
from pipadmm.splitting import AcceptFn, SplitProblem

logger = logging.getLogger(__name__)

Matrix = Any  # numpy.ndarray or a scipy.sparse matrix

_CONJUGATE_RTOL = 1e-9


def shrinkage(a: np.ndarray, kappa: float) -> np.ndarray:
    """Componentwise soft threshold ``sign(a) max(0, |a| - kappa)``."""
    if kappa < 0:
        raise DomainError(f"kappa must be nonnegative, got {kappa}")
    return np.sign(a) * np.maximum(np.abs(a) - kappa, 0.0)


def _negate(x: np.ndarray) -> np.ndarray:
    return -x


def _identity(x: np.ndarray) -> np.ndarray:
    return x


def _column_norms(C: Matrix) -> np.ndarray:
    if sparse.issparse(C):
        return np.sqrt(np.asarray(C.multiply(C).sum(axis=0)).ravel())
    return np.linalg.norm(C, axis=0)


def _gram(C: Matrix) -> np.ndarray:
    gram = C.T @ C
    return gram.toarray() if sparse.issparse(gram) else np.asarray(gram)


def _check_rows(C: Matrix, d: np.ndarray) -> None:
    if C.ndim != 2 or np.shape(d) != (C.shape[0],):
        raise ShapeError(f"C has shape {C.shape} but d has shape {np.shape(d)}")


# ----------------------------------------------------------------------
# LASSO
# ----------------------------------------------------------------------


def lasso_delta(C: Matrix, d: np.ndarray) -> float:
    """The experiments' regularisation weight ``0.1 |C* d|_inf``."""
    _check_rows(C, d)
    corr = float(np.max(np.abs(C.T @ d)))
    if corr == 0.0:
        raise DegenerateInstanceError("C* d = 0: x = 0 solves the LASSO trivially")
    return 0.1 * corr


@dataclass(frozen=True)
class LassoInstance:
    """``min 1/2 |C x - d|^2 + delta |x|_1``."""

    C: Matrix
    d: np.ndarray
    delta: float

    def __post_init__(self) -> None:
        _check_rows(self.C, self.d)
        if self.delta <= 0:
            raise DomainError(f"delta must be positive, got {self.delta}")

    @property
    def n(self) -> int:
        return int(self.C.shape[1])

    def loss(self, x: np.ndarray) -> float:
        r = self.C @ x - self.d
        return 0.5 * float(r @ r)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.C.T @ (self.C @ x - self.d)


def prepare_lasso(C: Matrix, d: np.ndarray, delta: float | None = None, scale: bool = True) -> LassoInstance:
    """Scale the columns of C to unit norm (zero columns untouched) and pick delta."""
    if scale:
        norms = _column_norms(C)
        factors = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
        C = C @ sparse.diags(factors) if sparse.issparse(C) else C * factors
        if np.any(norms == 0):
            logger.warning("%d zero columns left unscaled", int(np.sum(norms == 0)))
    d = np.asarray(d, dtype=float)
    return LassoInstance(C=C, d=d, delta=lasso_delta(C, d) if delta is None else delta)


def lasso_objective(inst: LassoInstance, x: np.ndarray) -> float:
    return inst.loss(x) + inst.delta * float(np.sum(np.abs(x)))


@dataclass
class _DirectFactorCache:
    gram: np.ndarray
    factors: dict[float, tuple[np.ndarray, bool]] = field(default_factory=dict)

    def solve(self, beta: float, rhs: np.ndarray) -> np.ndarray:
        if beta not in self.factors:
            shifted = self.gram + (beta + 1.0 / beta) * np.eye(self.gram.shape[0])
            self.factors[beta] = cho_factor(shifted, lower=True)
        return cho_solve(self.factors[beta], rhs)


def lasso_problem(
    inst: LassoInstance,
    config: SolverConfig | None = None,
    *,
    inner: Literal["cg", "direct"] = "cg",
    h_shift: float = 0.0,
) -> SplitProblem:
    """Build the LASSO split problem.

    Parameters
    ----------
    inst : LassoInstance
        A prepared instance.
    config : SolverConfig, optional
        Used to factorise the direct system ahead of the first solve.
    inner : {"cg", "direct"}
        ``"cg"`` runs CG on ``(C*C + beta I) x = C*d + beta y - gamma``
        started at the right-hand side.  ``"direct"`` solves the proximal
        subproblem with the extra ``|x - x_prev|^2 / (2 beta)`` term exactly,
        giving ``v = (x_prev - x~) / beta``.
    h_shift : float
        Proximal term ``H = h_shift * I`` on y.
    """
    if h_shift < 0:
        raise DomainError(f"h_shift must be nonnegative, got {h_shift}")
    if inner not in ("cg", "direct"):
        raise DomainError(f"unknown inner solver {inner!r}")
    C, n, delta = inst.C, inst.n, inst.delta
    ctd = C.T @ inst.d

    def x_oracle_cg(
        x_prev: np.ndarray,
        y_prev: np.ndarray,
        gamma_prev: np.ndarray,
        config: SolverConfig,
        accept: AcceptFn,
    ) -> tuple[np.ndarray, np.ndarray, int]:
        beta = config.beta
        rhs = ctd + beta * y_prev - gamma_prev

        def apply_S(x: np.ndarray) -> np.ndarray:
            return C.T @ (C @ x) + beta * x

        return cg_solve(apply_S, rhs, rhs.copy(), accept, config.inner_budget(n))

    cache = _DirectFactorCache(_gram(C)) if inner == "direct" else None
    if cache is not None and config is not None:
        cache.solve(config.beta, np.zeros(n))

    def x_oracle_direct(
        x_prev: np.ndarray,
        y_prev: np.ndarray,
        gamma_prev: np.ndarray,
        config: SolverConfig,
        accept: AcceptFn,
    ) -> tuple[np.ndarray, np.ndarray, int]:
        assert cache is not None
        beta = config.beta
        x_tilde = cache.solve(beta, ctd + beta * y_prev - gamma_prev + x_prev / beta)
        v = (x_prev - x_tilde) / beta
        if not accept(x_tilde, v):
            raise InnerSolveError(1, "direct solve rejected by the acceptance test")
        return x_tilde, v, 1

    def y_prox(
        x_tilde: np.ndarray, gamma_prev: np.ndarray, y_prev: np.ndarray, config: SolverConfig
    ) -> np.ndarray:
        beta = config.beta
        if h_shift == 0.0:
            return shrinkage(x_tilde + gamma_prev / beta, delta / beta)
        weight = beta + h_shift
        return shrinkage((beta * x_tilde + gamma_prev + h_shift * y_prev) / weight, delta / weight)

    def g_conjugate(s: np.ndarray) -> float:
        return 0.0 if float(np.max(np.abs(s))) <= delta * (1.0 + _CONJUGATE_RTOL) else math.inf

    return SplitProblem(
        x_dim=n,
        y_dim=n,
        c_dim=n,
        apply_A=_negate,
        apply_At=_negate,
        apply_B=_identity,
        apply_Bt=_identity,
        b=np.zeros(n),
        x_oracle=x_oracle_cg if inner == "cg" else x_oracle_direct,
        y_prox=y_prox,
        apply_H=(lambda u: h_shift * u) if h_shift > 0 else None,
        f_value=inst.loss,
        g_value=lambda y: delta * float(np.sum(np.abs(y))),
        g_conjugate=g_conjugate,
        name=f"lasso {inst.C.shape[0]}x{n}",
    )


# ----------------------------------------------------------------------
# l1-regularised logistic regression
# ----------------------------------------------------------------------


def _check_labels(d: np.ndarray) -> tuple[int, int]:
    if not np.all((d == 1.0) | (d == -1.0)):
        raise DomainError("labels must lie in {-1, +1}")
    m_pos = int(np.sum(d == 1.0))
    m_neg = d.size - m_pos
    if m_pos == 0 or m_neg == 0:
        raise DegenerateInstanceError("labels contain a single class")
    return m_pos, m_neg


def logreg_lambda_max(C: Matrix, d: np.ndarray) -> float:
    """Smallest weight for which the penalised problem has ``u = 0`` as solution.

    ``(1/m) |C* theta|_inf`` with ``theta_i = m_neg/m`` for positive labels
    and ``-m_pos/m`` for negative ones.
    """
    d = np.asarray(d, dtype=float)
    _check_rows(C, d)
    m_pos, m_neg = _check_labels(d)
    m = d.size
    theta = np.where(d == 1.0, m_neg / m, -m_pos / m)
    return float(np.max(np.abs(C.T @ theta))) / m


@dataclass(frozen=True)
class LogRegInstance:
    """``min sum_i log(1 + exp(-d_i <(1, c_i), x>)) + delta m |u|_1`` with ``x = (t, u)``.

    Index 0 of every x-space vector is the intercept t.
    """

    C: Matrix
    d: np.ndarray
    delta: float

    def __post_init__(self) -> None:
        _check_rows(self.C, self.d)
        _check_labels(self.d)
        if self.delta <= 0:
            raise DomainError(f"delta must be positive, got {self.delta}")

    @property
    def m(self) -> int:
        return int(self.C.shape[0])

    @property
    def n(self) -> int:
        return int(self.C.shape[1])

    @property
    def penalty(self) -> float:
        """Weight ``m * delta`` of ``|u|_1``."""
        return self.m * self.delta

    def margins(self, x: np.ndarray) -> np.ndarray:
        """``d_i <(1, c_i), x>``."""
        return self.d * (x[0] + self.C @ x[1:])

    def loss(self, x: np.ndarray) -> float:
        return float(np.sum(np.logaddexp(0.0, -self.margins(x))))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        w = -self.d * expit(-self.margins(x))
        return np.concatenate(([np.sum(w)], self.C.T @ w))

    def curvature_weights(self, x: np.ndarray) -> np.ndarray:
        z = self.margins(x)
        return expit(z) * expit(-z)

    def hessian(self, x: np.ndarray, shift: float = 0.0) -> np.ndarray:
        """Dense ``A* diag(w) A + shift I`` with ``A = [1, C]``."""
        w = self.curvature_weights(x)
        cw = self.C.T @ w
        if sparse.issparse(self.C):
            block = (self.C.T @ sparse.diags(w) @ self.C).toarray()
        else:
            block = self.C.T @ (w[:, None] * self.C)
        hess = np.empty((self.n + 1, self.n + 1))
        hess[0, 0] = np.sum(w)
        hess[0, 1:] = cw
        hess[1:, 0] = cw
        hess[1:, 1:] = block
        hess[np.diag_indices_from(hess)] += shift
        return hess

    def hessian_operator(self, x: np.ndarray, shift: float = 0.0) -> LinearOperator:
        w = self.curvature_weights(x)
        dim = self.n + 1

        def matvec(p: np.ndarray) -> np.ndarray:
            p = np.ravel(p)
            wa = w * (p[0] + self.C @ p[1:])
            return np.concatenate(([np.sum(wa)], self.C.T @ wa)) + shift * p

        return LinearOperator((dim, dim), matvec=matvec, dtype=float)


def prepare_logreg(C: Matrix, d: np.ndarray, delta: float | None = None) -> LogRegInstance:
    """Validate labels and default ``delta`` to ``0.5 * lambda_max``."""
    d = np.asarray(d, dtype=float)
    if delta is None:
        delta = 0.5 * logreg_lambda_max(C, d)
        if delta == 0.0:
            raise DegenerateInstanceError("lambda_max = 0: u = 0 solves the problem trivially")
    return LogRegInstance(C=C, d=d, delta=delta)


def logreg_objective(inst: LogRegInstance, x: np.ndarray) -> float:
    return inst.loss(x) + inst.penalty * float(np.sum(np.abs(x[1:])))


def logreg_problem(
    inst: LogRegInstance,
    config: SolverConfig | None = None,
    *,
    dense_threshold: int = DENSE_THRESHOLD,
) -> SplitProblem:
    """Build the logistic split problem; x and y live in dimension ``n + 1``.

    The x-oracle minimises
    ``h(x) = f(x) + <x, gamma_prev> + beta/2 |y_prev - x|^2`` by damped
    Newton from zero and returns ``v = grad h(x~)``.
    """
    dim = inst.n + 1
    penalty = inst.penalty

    def x_oracle(
        x_prev: np.ndarray,
        y_prev: np.ndarray,
        gamma_prev: np.ndarray,
        config: SolverConfig,
        accept: AcceptFn,
    ) -> tuple[np.ndarray, np.ndarray, int]:
        beta = config.beta

        def fun(x: np.ndarray) -> float:
            gap = y_prev - x
            return inst.loss(x) + float(x @ gamma_prev) + 0.5 * beta * float(gap @ gap)

        def grad(x: np.ndarray) -> np.ndarray:
            return inst.gradient(x) + gamma_prev + beta * (x - y_prev)

        def hess(x: np.ndarray) -> np.ndarray | LinearOperator:
            if dim <= dense_threshold:
                return inst.hessian(x, shift=beta)
            return inst.hessian_operator(x, shift=beta)

        return newton_solve(
            grad,
            hess,
            np.zeros(dim),
            accept,
            config.inner_budget(dim),
            fun=fun,
            dense_threshold=dense_threshold,
        )

    def y_prox(
        x_tilde: np.ndarray, gamma_prev: np.ndarray, y_prev: np.ndarray, config: SolverConfig
    ) -> np.ndarray:
        beta = config.beta
        y = x_tilde + gamma_prev / beta
        y[1:] = shrinkage(y[1:], penalty / beta)
        return y

    def g_value(y: np.ndarray) -> float:
        return penalty * float(np.sum(np.abs(y[1:])))

    def g_conjugate(s: np.ndarray) -> float:
        tol = _CONJUGATE_RTOL * (1.0 + penalty)
        if abs(float(s[0])) > tol or float(np.max(np.abs(s[1:]), initial=0.0)) > penalty + tol:
            return math.inf
        return 0.0

    return SplitProblem(
        x_dim=dim,
        y_dim=dim,
        c_dim=dim,
        apply_A=_negate,
        apply_At=_negate,
        apply_B=_identity,
        apply_Bt=_identity,
        b=np.zeros(dim),
        x_oracle=x_oracle,
        y_prox=y_prox,
        f_value=inst.loss,
        g_value=g_value,
        g_conjugate=g_conjugate,
        name=f"logreg {inst.m}x{inst.n}",
    )
