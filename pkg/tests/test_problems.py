"""Tests for the LASSO and logistic split problems."""

import numpy as np
import pytest

from pipadmm.exceptions import DegenerateInstanceError, DomainError
from pipadmm.models import SolverConfig
from pipadmm.problems import (
    LassoInstance,
    LogRegInstance,
    lasso_delta,
    lasso_objective,
    lasso_problem,
    logreg_lambda_max,
    logreg_objective,
    logreg_problem,
    prepare_lasso,
    shrinkage,
)
from pipadmm.solver import gamma_tilde, run


def _always(_x, _v):
    return True


def _fista(inst, iterations=5000):
    """Accelerated proximal gradient reference for the LASSO."""
    C, d = inst.C, inst.d
    step = 1.0 / np.linalg.norm(C, 2) ** 2
    x = np.zeros(C.shape[1])
    w, t = x.copy(), 1.0
    for _ in range(iterations):
        x_next = shrinkage(w - step * (C.T @ (C @ w - d)), step * inst.delta)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        w = x_next + ((t - 1.0) / t_next) * (x_next - x)
        x, t = x_next, t_next
    return x


class TestShrinkage:
    """Test the soft-threshold operator."""

    def test_identity_at_zero(self, rng):
        """Test kappa = 0 returns the input."""
        a = rng.standard_normal(6)
        np.testing.assert_array_equal(shrinkage(a, 0.0), a)

    def test_hand_example(self):
        """Test (1.2, -0.3) with kappa = 0.5."""
        np.testing.assert_allclose(shrinkage(np.array([1.2, -0.3]), 0.5), [0.7, 0.0])

    def test_small_input_vanishes(self):
        """Test |a|_inf <= kappa gives zero."""
        np.testing.assert_array_equal(shrinkage(np.array([0.2, -0.5]), 0.5), [0.0, 0.0])

    def test_negative_kappa(self):
        """Test kappa < 0 is rejected."""
        with pytest.raises(DomainError):
            shrinkage(np.ones(2), -0.1)

    def test_nonexpansive_and_sign(self, rng):
        """Test nonexpansiveness and sign preservation on random pairs."""
        for _ in range(20):
            a, b = rng.standard_normal(10), rng.standard_normal(10)
            sa = shrinkage(a, 0.4)
            assert np.linalg.norm(sa - shrinkage(b, 0.4)) <= np.linalg.norm(a - b) + 1e-15
            assert np.all((sa == 0) | (np.sign(sa) == np.sign(a)))
            assert np.max(np.abs(sa)) <= max(0.0, np.max(np.abs(a)) - 0.4) + 1e-15


class TestLassoDelta:
    """Test the LASSO regularisation rule."""

    def test_hand_example(self):
        """Test C = I, d = (2, -4)."""
        assert lasso_delta(np.eye(2), np.array([2.0, -4.0])) == pytest.approx(0.4)

    def test_degenerate(self):
        """Test d = 0 is rejected."""
        with pytest.raises(DegenerateInstanceError):
            lasso_delta(np.eye(2), np.zeros(2))

    def test_homogeneous(self, small_lasso):
        """Test scaling d scales delta."""
        base = lasso_delta(small_lasso.C, small_lasso.d)
        assert lasso_delta(small_lasso.C, 3.0 * small_lasso.d) == pytest.approx(3.0 * base)

    def test_prepare_scales_columns(self, rng):
        """Test unit column norms after preparation."""
        inst = prepare_lasso(rng.standard_normal((8, 5)) * 4.0, rng.standard_normal(8))
        np.testing.assert_allclose(np.linalg.norm(inst.C, axis=0), 1.0, atol=1e-12)


class TestLassoProblem:
    """Test the LASSO oracles."""

    def test_structure(self, small_lasso):
        """Test A = -I, B = I, b = 0 and adjoint consistency."""
        problem = lasso_problem(small_lasso)
        u = np.arange(problem.x_dim, dtype=float)
        np.testing.assert_array_equal(problem.apply_A(u), -u)
        np.testing.assert_array_equal(problem.apply_B(u), u)
        assert not problem.b.any()
        assert problem.apply_H is None
        problem.check_adjoints(np.random.default_rng(0))

    def test_cg_certificate_identity(self, small_lasso, rng):
        """Test v = (C*C + beta I) x~ - rhs = grad f(x~) - A* gamma~."""
        config = SolverConfig(beta=2.0)
        problem = lasso_problem(small_lasso)
        n = problem.x_dim
        x_prev, y_prev, g_prev = rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(n)
        x_tilde, v, iters = problem.x_oracle(x_prev, y_prev, g_prev, config, _always)
        assert iters == 0

        C, d, beta = small_lasso.C, small_lasso.d, config.beta
        rhs = C.T @ d + beta * y_prev - g_prev
        np.testing.assert_allclose(v, C.T @ (C @ x_tilde) + beta * x_tilde - rhs, rtol=1e-10, atol=1e-10)
        gt = gamma_tilde(g_prev, x_tilde, y_prev, problem, beta)
        np.testing.assert_allclose(v, small_lasso.gradient(x_tilde) - problem.apply_At(gt), atol=1e-10)

    def test_direct_certificate(self, tiny_lasso, rng):
        """Test the direct oracle returns v = (x_prev - x~)/beta solving the inclusion."""
        config = SolverConfig(beta=0.5)
        problem = lasso_problem(tiny_lasso, config, inner="direct")
        n = problem.x_dim
        x_prev, y_prev, g_prev = rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(n)
        x_tilde, v, iters = problem.x_oracle(x_prev, y_prev, g_prev, config, _always)
        assert iters == 1
        np.testing.assert_allclose(v, (x_prev - x_tilde) / config.beta)
        gt = gamma_tilde(g_prev, x_tilde, y_prev, problem, config.beta)
        np.testing.assert_allclose(v, tiny_lasso.gradient(x_tilde) + gt, atol=1e-8)

    def test_y_prox_with_shift(self, small_lasso, rng):
        """Test the y-update optimality conditions with H = s0 I."""
        s0, config = 0.7, SolverConfig(beta=1.5)
        problem = lasso_problem(small_lasso, h_shift=s0)
        n = problem.y_dim
        x_tilde, g_prev, y_prev = rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(n)
        y = problem.y_prox(x_tilde, g_prev, y_prev, config)
        gt = gamma_tilde(g_prev, x_tilde, y_prev, problem, config.beta)
        s = gt - (config.beta + s0) * (y - y_prev)
        nonzero = y != 0
        np.testing.assert_allclose(s[nonzero], small_lasso.delta * np.sign(y[nonzero]), atol=1e-10)
        assert np.all(np.abs(s[~nonzero]) <= small_lasso.delta + 1e-10)
        problem.check_proximal_term(np.random.default_rng(0))

    def test_negative_shift(self, small_lasso):
        """Test a negative proximal shift is rejected."""
        with pytest.raises(DomainError):
            lasso_problem(small_lasso, h_shift=-1.0)

    def test_objective_matches_reference(self, small_lasso):
        """Test the solved objective against accelerated proximal gradient."""
        result = run(lasso_problem(small_lasso), SolverConfig(outer_tol=1e-6, max_outer=20000))
        ours = lasso_objective(small_lasso, result.final_iterate.y)
        reference = lasso_objective(small_lasso, _fista(small_lasso))
        assert ours == pytest.approx(reference, rel=1e-4)

    def test_objective_oracles(self, one_d_lasso):
        """Test f, g and the conjugate of g."""
        problem = lasso_problem(one_d_lasso)
        assert problem.objective(np.array([0.7]), np.array([0.7])) == pytest.approx(0.045 + 0.21)
        assert problem.g_conjugate(np.array([0.3])) == 0.0
        assert problem.g_conjugate(np.array([0.31])) == np.inf


class TestLogRegLambdaMax:
    """Test lambda_max."""

    def test_hand_example(self):
        """Test m = 2, C = (1, -1), d = (+1, -1)."""
        assert logreg_lambda_max(np.array([[1.0], [-1.0]]), np.array([1.0, -1.0])) == pytest.approx(0.5)

    def test_single_class(self):
        """Test single-class labels are rejected."""
        with pytest.raises(DegenerateInstanceError):
            logreg_lambda_max(np.ones((3, 2)), np.ones(3))

    def test_permutation_invariant(self, small_logreg, rng):
        """Test reordering samples leaves lambda_max unchanged."""
        perm = rng.permutation(small_logreg.m)
        a = logreg_lambda_max(small_logreg.C, small_logreg.d)
        b = logreg_lambda_max(small_logreg.C[perm], small_logreg.d[perm])
        assert a == pytest.approx(b, rel=1e-12)

    def test_bad_labels(self):
        """Test labels outside {-1, +1}."""
        with pytest.raises(DomainError):
            logreg_lambda_max(np.ones((2, 1)), np.array([0.0, 1.0]))


class TestLogRegDerivatives:
    """Test gradient and Hessian oracles against finite differences."""

    def test_gradient(self, small_logreg, rng):
        """Test central differences on 20 random points."""
        h = 1e-6
        dim = small_logreg.n + 1
        for _ in range(20):
            x = rng.standard_normal(dim)
            g = small_logreg.gradient(x)
            fd = np.array(
                [
                    (small_logreg.loss(x + h * e) - small_logreg.loss(x - h * e)) / (2 * h)
                    for e in np.eye(dim)
                ]
            )
            assert np.max(np.abs(fd - g)) <= 1e-6 * max(1.0, np.max(np.abs(g)))

    def test_hessian(self, small_logreg, rng):
        """Test the Hessian against differenced gradients on 20 random points."""
        h = 1e-6
        dim = small_logreg.n + 1
        for _ in range(20):
            x = rng.standard_normal(dim)
            H = small_logreg.hessian(x)
            fd = np.column_stack(
                [
                    (small_logreg.gradient(x + h * e) - small_logreg.gradient(x - h * e)) / (2 * h)
                    for e in np.eye(dim)
                ]
            )
            assert np.max(np.abs(fd - H)) <= 1e-5 * max(1.0, np.max(np.abs(H)))

    def test_operator_matches_dense(self, small_logreg, rng):
        """Test the matrix-free Hessian."""
        x, p = rng.standard_normal(small_logreg.n + 1), rng.standard_normal(small_logreg.n + 1)
        np.testing.assert_allclose(
            small_logreg.hessian_operator(x, shift=2.0).matvec(p),
            small_logreg.hessian(x, shift=2.0) @ p,
            rtol=1e-12,
            atol=1e-12,
        )


class TestLogRegProblem:
    """Test the logistic oracles."""

    def test_stationary_start(self):
        """Test v = 0 at the zero start when grad f(0) = 0."""
        inst = LogRegInstance(C=np.array([[1.0], [1.0]]), d=np.array([1.0, -1.0]), delta=0.1)
        problem = logreg_problem(inst)
        zero = np.zeros(2)
        x_tilde, v, iters = problem.x_oracle(zero, zero, zero, SolverConfig(), lambda _x, v: not v.any())
        assert iters == 0
        np.testing.assert_array_equal(x_tilde, zero)
        np.testing.assert_array_equal(v, zero)

    def test_certificate_is_grad_h(self, small_logreg, small_logreg_problem, rng):
        """Test v = grad f(x~) + gamma_prev + beta (x~ - y_prev)."""
        config = SolverConfig(beta=1.0)
        dim = small_logreg_problem.x_dim
        assert dim == small_logreg.n + 1
        y_prev, g_prev = rng.standard_normal(dim), rng.standard_normal(dim)
        accept = lambda _x, v: float(np.linalg.norm(v)) <= 1e-9
        x_tilde, v, iters = small_logreg_problem.x_oracle(np.zeros(dim), y_prev, g_prev, config, accept)
        assert iters >= 1
        expected = small_logreg.gradient(x_tilde) + g_prev + config.beta * (x_tilde - y_prev)
        np.testing.assert_allclose(v, expected, rtol=0, atol=1e-12)

    def test_intercept_not_penalised(self, small_logreg, small_logreg_problem, rng):
        """Test the y-update shrinks u only."""
        config = SolverConfig(beta=2.0)
        dim = small_logreg_problem.x_dim
        x_tilde, g_prev = rng.standard_normal(dim), rng.standard_normal(dim)
        y = small_logreg_problem.y_prox(x_tilde, g_prev, np.zeros(dim), config)
        assert y[0] == pytest.approx(x_tilde[0] + g_prev[0] / 2.0)
        kappa = small_logreg.penalty / 2.0
        np.testing.assert_allclose(y[1:], shrinkage(x_tilde[1:] + g_prev[1:] / 2.0, kappa))

    def test_solve_converges(self, small_logreg, small_logreg_problem):
        """Test a full logistic solve."""
        result = run(small_logreg_problem, SolverConfig(theta=1.3))
        assert result.converged
        value = logreg_objective(small_logreg, result.final_iterate.y)
        assert value <= logreg_objective(small_logreg, np.zeros(small_logreg.n + 1))

    def test_rejects_bad_delta(self):
        """Test a nonpositive delta."""
        with pytest.raises(DomainError):
            LogRegInstance(C=np.ones((2, 1)), d=np.array([1.0, -1.0]), delta=0.0)
        with pytest.raises(DomainError):
            LassoInstance(C=np.ones((2, 1)), d=np.ones(2), delta=-1.0)
