"""Runtime certificates for the HPE embedding of the partially inexact ADMM.

The outer iteration is an instance of a modified hybrid proximal
extragradient (HPE) scheme with respect to the block operator

    M = diag(I / beta,  H + beta B* B,  I / (theta beta)).

This module computes the quantities of that embedding (sigma, mu, eta_k), the
per-iteration error-condition slack, and the pointwise and ergodic residuals
together with their iteration-complexity bounds, so that a solve can be
checked against them while it runs.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from pipadmm.exceptions import CertificateError, DomainError, InvariantViolationError
from pipadmm.models import (
    CertificateRow,
    ErgodicReport,
    HpeCertificate,
    SolverConfig,
)
from pipadmm.splitting import Iterate, LinearMap, SplitProblem, Triple

logger = logging.getLogger(__name__)

CERT_TOL = 1e-8


def triple_diff(a: Triple, b: Triple) -> Triple:
    """Return ``a - b`` blockwise."""
    return a[0] - b[0], a[1] - b[1], a[2] - b[2]


# ----------------------------------------------------------------------
# M-seminorm
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class MSeminorm:
    """The seminorm induced by ``diag(I/beta, H + beta B*B, I/(theta beta))``."""

    beta: float
    theta: float
    apply_B: LinearMap
    apply_Bt: LinearMap
    apply_H: LinearMap | None = None

    @classmethod
    def for_problem(cls, problem: SplitProblem, config: SolverConfig) -> MSeminorm:
        return cls(
            beta=config.beta,
            theta=config.theta,
            apply_B=problem.apply_B,
            apply_Bt=problem.apply_Bt,
            apply_H=problem.apply_H,
        )

    def apply_y_block(self, zy: np.ndarray) -> np.ndarray:
        """Return ``(H + beta B*B) zy``."""
        out = self.beta * self.apply_Bt(self.apply_B(zy))
        if self.apply_H is not None:
            out = out + self.apply_H(zy)
        return out

    def h_squared(self, zy: np.ndarray) -> float:
        """Return ``<H zy, zy>`` (zero when H is absent)."""
        if self.apply_H is None:
            return 0.0
        return float(self.apply_H(zy) @ zy)

    def squared(self, z: Triple) -> float:
        zx, zy, zg = z
        bz = self.apply_B(zy)
        terms = (
            float(zx @ zx) / self.beta,
            self.h_squared(zy),
            self.beta * float(bz @ bz),
            float(zg @ zg) / (self.theta * self.beta),
        )
        total = sum(terms)
        if total < -1e-12 * (1.0 + sum(abs(t) for t in terms)):
            raise InvariantViolationError(
                f"negative M-seminorm square {total!r}; H or B is inconsistent"
            )
        return max(total, 0.0)


def m_seminorm(z: Triple, metric: MSeminorm) -> float:
    """Return ``sqrt(<M z, z>)``."""
    return math.sqrt(metric.squared(z))


def d0_estimate(z0: Triple, z_ref: Triple, metric: MSeminorm) -> float:
    """Upper bound on the squared M-distance from ``z0`` to the solution set.

    ``z_ref`` should come from a high-accuracy reference solve; every bound
    below increases with d0, so the estimate keeps the assertions valid.
    """
    return metric.squared(triple_diff(z_ref, z0))


# ----------------------------------------------------------------------
# sigma, mu, eta
# ----------------------------------------------------------------------


def g_matrix(sigma: float, tau1: float, theta: float) -> np.ndarray:
    """The 2x2 matrix whose semidefiniteness makes sigma admissible."""
    coupling = sigma - 1.0 + (1.0 - tau1) * theta
    g11 = sigma - 1.0 + (sigma - tau1) * theta
    g22 = sigma - 1.0 + (2.0 - theta - tau1) * theta
    off = (1.0 - theta) * coupling
    return np.array([[g11, off], [off, g22]])


def is_psd_2x2(g: np.ndarray) -> bool:
    return bool(g[0, 0] >= 0 and g[1, 1] >= 0 and g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0] >= 0)


def min_sigma(tau1: float, tau2: float, theta: float, tol: float = 1e-12) -> float:
    """Smallest ``sigma in [tau2, 1)`` with ``g_matrix(sigma)`` semidefinite.

    G grows in the Loewner order with sigma, so the admissible set is an
    interval and bisection applies.
    """
    from pipadmm.solver import theta_upper_bound

    if not (0.0 <= tau2 < 1.0):
        raise DomainError(f"tau2 must lie in [0, 1), got {tau2}")
    if not (0.0 < theta < theta_upper_bound(tau1)):
        raise DomainError(f"theta={theta} violates the stepsize condition for tau1={tau1}")

    lo = max(tau2, 0.0)
    if is_psd_2x2(g_matrix(lo, tau1, theta)):
        return lo
    hi = 1.0
    if not is_psd_2x2(g_matrix(hi, tau1, theta)):
        raise CertificateError("G(1) semidefinite", float(np.linalg.eigvalsh(g_matrix(hi, tau1, theta))[0]))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_psd_2x2(g_matrix(mid, tau1, theta)):
            hi = mid
        else:
            lo = mid
    if hi >= 1.0:
        raise CertificateError("sigma", hi, "no admissible sigma below 1")
    return hi


def mu_and_eta0(
    sigma: float, tau1: float, theta: float, d0: float
) -> tuple[float, float]:
    """Return ``(mu, eta0)`` with ``eta0 = mu * d0``."""
    if d0 < 0:
        raise DomainError(f"d0 must be nonnegative, got {d0}")
    mu = (
        4.0
        * (sigma - 1.0 + (1.0 - tau1) * theta)
        / theta**1.5
        * max(1.0, theta / (2.0 - theta))
    )
    if mu < -1e-12:
        raise CertificateError("mu", mu)
    mu = max(mu, 0.0)
    return mu, mu * d0


def eta_k(
    gamma_diff: np.ndarray,
    y_diff: np.ndarray,
    sigma: float,
    tau1: float,
    theta: float,
    beta: float,
    apply_H: LinearMap | None = None,
) -> float:
    """The auxiliary nonnegative sequence of the HPE embedding."""
    c_gamma = sigma - 1.0 + (2.0 - theta - tau1) * theta
    c_h = sigma - 1.0 + (1.0 - tau1) * theta
    for label, coef in (("eta gamma coefficient", c_gamma), ("eta H coefficient", c_h)):
        if coef < -1e-12:
            raise CertificateError(label, coef)
    value = max(c_gamma, 0.0) / (beta * theta**3) * float(gamma_diff @ gamma_diff)
    if apply_H is not None:
        value += max(c_h, 0.0) / theta * float(apply_H(y_diff) @ y_diff)
    return max(value, 0.0)


# ----------------------------------------------------------------------
# Error condition and pointwise bound
# ----------------------------------------------------------------------


def hpe_slack(
    z_prev: Triple,
    z: Triple,
    z_tilde: Triple,
    eta_prev: float,
    eta_curr: float,
    sigma: float,
    metric: MSeminorm,
) -> float:
    """``sigma |z~ - z_prev|_M^2 + eta_prev - |z~ - z|_M^2 - eta_curr``."""
    return (
        sigma * metric.squared(triple_diff(z_tilde, z_prev))
        + eta_prev
        - metric.squared(triple_diff(z_tilde, z))
        - eta_curr
    )


def hpe_certificate(
    z_prev: Triple,
    z: Triple,
    z_tilde: Triple,
    eta_prev: float,
    eta_curr: float,
    sigma: float,
    mu: float,
    metric: MSeminorm,
) -> HpeCertificate:
    """Slack together with the magnitude it should be compared against."""
    before = sigma * metric.squared(triple_diff(z_tilde, z_prev))
    after = metric.squared(triple_diff(z_tilde, z))
    return HpeCertificate(
        sigma=sigma,
        mu=mu,
        eta_prev=eta_prev,
        eta_curr=eta_curr,
        slack=before + eta_prev - after - eta_curr,
        scale=1.0 + before + eta_prev + after + eta_curr,
    )


def pointwise_bound(d0: float, sigma: float, mu: float, k: int) -> float:
    if sigma >= 1.0:
        raise DomainError(f"sigma must be below 1, got {sigma}")
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    return math.sqrt(d0 / k) * math.sqrt((2.0 * (1.0 + sigma) + 4.0 * mu) / (1.0 - sigma))


def pointwise_report(
    step_norms: Sequence[float], d0: float, sigma: float, mu: float, k: int
) -> tuple[float, float]:
    """Return ``(min_{i<=k} |z_{i-1} - z_i|_M, bound)``."""
    if not 1 <= k <= len(step_norms):
        raise DomainError(f"k={k} outside the recorded trace (length {len(step_norms)})")
    return min(step_norms[:k]), pointwise_bound(d0, sigma, mu, k)


# ----------------------------------------------------------------------
# Ergodic sequences
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ErgodicState:
    """Sufficient statistics of the ergodic sequences after ``k`` iterations.

    The epsilons reference the final averages, so the bilinear terms are
    accumulated separately and combined in :func:`ergodic_report`.
    """

    k: int
    sum_x_tilde: np.ndarray
    sum_y: np.ndarray
    sum_gamma_tilde: np.ndarray
    sum_r_x: np.ndarray
    sum_r_y: np.ndarray
    sum_r_gamma: np.ndarray
    # certificate vectors s_x = r_x/beta + A* gamma~, s_y = (H + beta B*B) r_y + B* gamma~
    sum_s_x: np.ndarray
    sum_s_y: np.ndarray
    inner_sum_x: float
    inner_sum_y: float
    # M r_i blocks and <M r_i, z~_i>, for the combined epsilon
    sum_mr_gamma: np.ndarray
    dot_mr_x: float
    dot_mr_y: float
    dot_mr_gamma: float
    sum_mr_x: np.ndarray
    sum_mr_y: np.ndarray

    @classmethod
    def empty(cls, problem: SplitProblem) -> ErgodicState:
        nx, ny, nc = problem.x_dim, problem.y_dim, problem.c_dim
        return cls(
            k=0,
            sum_x_tilde=np.zeros(nx),
            sum_y=np.zeros(ny),
            sum_gamma_tilde=np.zeros(nc),
            sum_r_x=np.zeros(nx),
            sum_r_y=np.zeros(ny),
            sum_r_gamma=np.zeros(nc),
            sum_s_x=np.zeros(nx),
            sum_s_y=np.zeros(ny),
            inner_sum_x=0.0,
            inner_sum_y=0.0,
            sum_mr_gamma=np.zeros(nc),
            dot_mr_x=0.0,
            dot_mr_y=0.0,
            dot_mr_gamma=0.0,
            sum_mr_x=np.zeros(nx),
            sum_mr_y=np.zeros(ny),
        )

    def averages(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(x~^a, y^a, gamma~^a)``."""
        if self.k < 1:
            raise DomainError("no iterations accumulated")
        return self.sum_x_tilde / self.k, self.sum_y / self.k, self.sum_gamma_tilde / self.k

    def mean_certificates(self) -> tuple[np.ndarray, np.ndarray]:
        """Return the averaged certificate vectors ``(s_x^a, s_y^a)``."""
        if self.k < 1:
            raise DomainError("no iterations accumulated")
        return self.sum_s_x / self.k, self.sum_s_y / self.k


def ergodic_update(
    state: ErgodicState,
    iterate_prev: Iterate,
    iterate_curr: Iterate,
    problem: SplitProblem,
    beta: float,
    theta: float,
    apply_H: LinearMap | None = None,
) -> ErgodicState:
    """Fold iteration ``i = iterate_curr.k`` into the ergodic statistics."""
    metric = MSeminorm(beta, theta, problem.apply_B, problem.apply_Bt, apply_H)
    r_x = iterate_prev.x - iterate_curr.x
    r_y = iterate_prev.y - iterate_curr.y
    r_gamma = iterate_prev.gamma - iterate_curr.gamma
    gt = iterate_curr.gamma_tilde
    xt = iterate_curr.x_tilde
    y = iterate_curr.y

    mr_x = r_x / beta
    mr_y = metric.apply_y_block(r_y)
    mr_gamma = r_gamma / (theta * beta)
    s_x = mr_x + problem.apply_At(gt)
    s_y = mr_y + problem.apply_Bt(gt)

    return replace(
        state,
        k=state.k + 1,
        sum_x_tilde=state.sum_x_tilde + xt,
        sum_y=state.sum_y + y,
        sum_gamma_tilde=state.sum_gamma_tilde + gt,
        sum_r_x=state.sum_r_x + r_x,
        sum_r_y=state.sum_r_y + r_y,
        sum_r_gamma=state.sum_r_gamma + r_gamma,
        sum_s_x=state.sum_s_x + s_x,
        sum_s_y=state.sum_s_y + s_y,
        inner_sum_x=state.inner_sum_x + float(s_x @ xt),
        inner_sum_y=state.inner_sum_y + float(s_y @ y),
        sum_mr_x=state.sum_mr_x + mr_x,
        sum_mr_y=state.sum_mr_y + mr_y,
        sum_mr_gamma=state.sum_mr_gamma + mr_gamma,
        dot_mr_x=state.dot_mr_x + float(mr_x @ xt),
        dot_mr_y=state.dot_mr_y + float(mr_y @ y),
        dot_mr_gamma=state.dot_mr_gamma + float(mr_gamma @ gt),
    )


def ergodic_report(
    state: ErgodicState,
    metric: MSeminorm,
    problem: SplitProblem,
    d0: float,
    sigma: float,
    mu: float,
) -> ErgodicReport:
    """Ergodic residual, epsilons, their bounds and the feasibility gap."""
    k = state.k
    if k < 1:
        raise DomainError("ergodic report needs at least one iteration")
    if sigma >= 1.0:
        raise DomainError(f"sigma must be below 1, got {sigma}")
    xa, ya, ga = state.averages()
    r_a = (state.sum_r_x / k, state.sum_r_y / k, state.sum_r_gamma / k)
    s_xa, s_ya = state.mean_certificates()

    eps_x = state.inner_sum_x / k - float(s_xa @ xa)
    eps_y = state.inner_sum_y / k - float(s_ya @ ya)
    eps_combined = (
        state.dot_mr_x / k
        - float(state.sum_mr_x / k @ xa)
        + state.dot_mr_y / k
        - float(state.sum_mr_y / k @ ya)
        + state.dot_mr_gamma / k
        - float(state.sum_mr_gamma / k @ ga)
    )

    ax = problem.apply_A(xa)
    by = problem.apply_B(ya)
    scaled_r_gamma = r_a[2] / (metric.theta * metric.beta)
    gap = float(np.linalg.norm(ax + by - problem.b - scaled_r_gamma))
    gap_scale = 1.0 + float(
        np.linalg.norm(ax) + np.linalg.norm(by) + np.linalg.norm(problem.b)
        + np.linalg.norm(scaled_r_gamma)
    )

    return ErgodicReport(
        k=k,
        r_a_norm=m_seminorm(r_a, metric),
        eps_x=eps_x,
        eps_y=eps_y,
        eps_combined=eps_combined,
        residual_bound=2.0 * math.sqrt((1.0 + mu) * d0) / k,
        eps_bound=3.0 * (1.0 + mu) * (3.0 - 2.0 * sigma) * d0 / (2.0 * (1.0 - sigma) * k),
        feasibility_gap=gap,
        feasibility_scale=gap_scale,
    )


def subgradient_probe_margin(
    state: ErgodicState, problem: SplitProblem, eps_x: float, points: Iterable[np.ndarray]
) -> float:
    """Smallest ``f(w) - f(x~^a) - <s_x^a, w - x~^a> + eps_x`` over probe points.

    Nonnegative whenever ``s_x^a`` is an ``eps_x``-subgradient of f at ``x~^a``.
    """
    if problem.f_value is None:
        raise DomainError("problem has no f_value oracle")
    xa, _, _ = state.averages()
    s_xa, _ = state.mean_certificates()
    fa = problem.f_value(xa)
    return min(
        problem.f_value(w) - fa - float(s_xa @ (w - xa)) + eps_x for w in points
    )


def fenchel_gap_y(state: ErgodicState, problem: SplitProblem) -> float:
    """``g(y^a) + g*(s_y^a) - <s_y^a, y^a>``; at most eps_y for an eps_y-subgradient."""
    if problem.g_value is None or problem.g_conjugate is None:
        raise DomainError("problem has no g_value / g_conjugate oracle")
    _, ya, _ = state.averages()
    _, s_ya = state.mean_certificates()
    return float(problem.g_value(ya) + problem.g_conjugate(s_ya) - s_ya @ ya)


# ----------------------------------------------------------------------
# Monitor
# ----------------------------------------------------------------------


class Violation(NamedTuple):
    """One failed certificate check."""

    quantity: str
    value: float
    message: str


class HpeMonitor:
    """Observes a solve and checks every certificate as iterates arrive.

    Parameters
    ----------
    problem : SplitProblem
        The instance being solved.
    config : SolverConfig
        The configuration of the solve (sigma and mu depend on it only).
    d0 : float, optional
        Upper bound on the squared M-distance to the solution set, usually
        from :func:`d0_estimate`.  Without it the complexity bounds are
        reported as infinite and the first slack is not checked.
    strict : bool
        Raise :class:`CertificateError` on the first violation instead of
        logging it.

    The monitor only reads the iterates it is given; attaching it never
    changes a solve.
    """

    def __init__(
        self,
        problem: SplitProblem,
        config: SolverConfig,
        d0: float | None = None,
        *,
        strict: bool = False,
    ) -> None:
        tau1, tau2 = config.relative_tolerances
        self.problem = problem
        self.config = config
        self.d0 = d0
        self.strict = strict
        self.metric = MSeminorm.for_problem(problem, config)
        self.sigma = min_sigma(tau1, tau2, config.theta)
        self.mu, self.eta0 = mu_and_eta0(self.sigma, tau1, config.theta, d0 or 0.0)
        self.rows: list[CertificateRow] = []
        self._tau1 = tau1
        self._eta_prev = self.eta0
        self._step_norms: list[float] = []
        self._state = ErgodicState.empty(problem)
        logger.debug(
            "HPE monitor: sigma=%.12g mu=%.6g eta0=%.6g d0=%s",
            self.sigma, self.mu, self.eta0, d0,
        )

    @property
    def ergodic_state(self) -> ErgodicState:
        return self._state

    def observe(self, prev: Iterate, curr: Iterate) -> CertificateRow:
        """Record the certificates of iteration ``curr.k``."""
        cfg = self.config
        eta = eta_k(
            curr.gamma - prev.gamma,
            curr.y - prev.y,
            self.sigma,
            self._tau1,
            cfg.theta,
            cfg.beta,
            self.problem.apply_H,
        )
        cert = hpe_certificate(
            prev.z, curr.z, curr.z_tilde, self._eta_prev, eta, self.sigma, self.mu, self.metric
        )
        self._step_norms.append(m_seminorm(triple_diff(prev.z, curr.z), self.metric))
        self._state = ergodic_update(
            self._state, prev, curr, self.problem, cfg.beta, cfg.theta, self.problem.apply_H
        )

        d0 = self.d0 if self.d0 is not None else 0.0
        k = len(self._step_norms)
        best, bound = pointwise_report(self._step_norms, d0, self.sigma, self.mu, k)
        erg = ergodic_report(self._state, self.metric, self.problem, d0, self.sigma, self.mu)
        if self.d0 is None:
            bound = math.inf
            erg = erg.model_copy(update={"residual_bound": math.inf, "eps_bound": math.inf})

        row = CertificateRow(
            k=curr.k,
            slack=cert.slack,
            slack_scale=cert.scale,
            eta=eta,
            best_step_norm=best,
            pointwise_bound=bound,
            r_a_norm=erg.r_a_norm,
            ergodic_bound=erg.residual_bound,
            eps_x=erg.eps_x,
            eps_y=erg.eps_y,
            eps_combined=erg.eps_combined,
            eps_bound=erg.eps_bound,
            feasibility_gap=erg.feasibility_gap,
            feasibility_scale=erg.feasibility_scale,
        )
        self.rows.append(row)
        self._eta_prev = eta

        for found in self._row_violations(row):
            logger.warning("iteration %d: %s", row.k, found.message)
            if self.strict:
                raise CertificateError(found.quantity, found.value, found.message)
        return row

    def violations(self) -> list[str]:
        """All violations recorded so far, one message per failed check."""
        return [
            f"iteration {row.k}: {found.message}"
            for row in self.rows
            for found in self._row_violations(row)
        ]

    def _row_violations(self, row: CertificateRow) -> list[Violation]:
        found: list[Violation] = []
        first_unchecked = self.d0 is None and row.k == 1
        if not first_unchecked and row.slack < -CERT_TOL * row.slack_scale:
            found.append(
                Violation("slack", row.slack, f"slack {row.slack:.3e} below -1e-8 * {row.slack_scale:.3e}")
            )
        if row.best_step_norm > row.pointwise_bound + CERT_TOL * (1.0 + row.pointwise_bound):
            found.append(
                Violation(
                    "best_step_norm",
                    row.best_step_norm,
                    f"pointwise {row.best_step_norm:.3e} exceeds bound {row.pointwise_bound:.3e}",
                )
            )
        if row.r_a_norm > row.ergodic_bound + CERT_TOL * (1.0 + row.ergodic_bound):
            found.append(
                Violation(
                    "r_a_norm",
                    row.r_a_norm,
                    f"ergodic {row.r_a_norm:.3e} exceeds bound {row.ergodic_bound:.3e}",
                )
            )
        for name, eps in (("eps_x", row.eps_x), ("eps_y", row.eps_y)):
            if eps < -CERT_TOL:
                found.append(Violation(name, eps, f"epsilon negative ({name}={eps:.3e})"))
        eps_sum = row.eps_x + row.eps_y
        if eps_sum > row.eps_bound + CERT_TOL * (1.0 + row.eps_bound):
            found.append(
                Violation(
                    "eps_x + eps_y", eps_sum, f"epsilon {eps_sum:.3e} exceeds bound {row.eps_bound:.3e}"
                )
            )
        if row.feasibility_gap > 1e-10 * row.feasibility_scale:
            found.append(
                Violation(
                    "feasibility_gap", row.feasibility_gap, f"feasibility gap {row.feasibility_gap:.3e}"
                )
            )
        return found


# ----------------------------------------------------------------------
# Serialisation
# ----------------------------------------------------------------------


def write_certificate_csv(
    rows: Sequence[CertificateRow],
    path: str | Path,
    context: dict[str, object] | None = None,
    append: bool = False,
) -> None:
    """Write certificate rows as CSV.

    ``context`` adds constant leading columns (dataset, method, ...) to every
    row; with ``append`` the header is skipped and rows are added to ``path``.
    """
    context = context or {}
    fields = list(CertificateRow.model_fields)
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if not append:
            writer.writerow([*context, *fields])
        for row in rows:
            dumped = row.model_dump()
            writer.writerow([*context.values(), *(repr(dumped[name]) for name in fields)])


def certificate_json(rows: Sequence[CertificateRow]) -> str:
    return json.dumps([row.model_dump() for row in rows], indent=2, default=str)
