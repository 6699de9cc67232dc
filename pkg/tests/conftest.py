"""Shared test fixtures."""

import numpy as np
import pytest

from pipadmm.data import gen_random_lasso, gen_random_logreg
from pipadmm.models import RandomLassoSpec, RandomLogRegSpec, SolverConfig
from pipadmm.problems import LassoInstance, lasso_problem, logreg_problem


@pytest.fixture
def rng():
    """Seeded generator for randomized checks."""
    return np.random.default_rng(1234)


@pytest.fixture
def default_config():
    """Experiment defaults: beta = theta = 1."""
    return SolverConfig()


@pytest.fixture
def one_d_lasso():
    """C = 1, d = 1, delta = 0.3; the solution is x = y = 0.7, gamma = 0.3."""
    return LassoInstance(C=np.array([[1.0]]), d=np.array([1.0]), delta=0.3)


@pytest.fixture
def one_d_problem(one_d_lasso):
    return lasso_problem(one_d_lasso)


@pytest.fixture
def small_lasso():
    """Seeded 50 x 200 random LASSO instance."""
    return gen_random_lasso(RandomLassoSpec(m=50, n=200, seed=0))


@pytest.fixture
def small_lasso_problem(small_lasso):
    return lasso_problem(small_lasso)


@pytest.fixture
def tiny_lasso():
    """Seeded 30 x 60 random LASSO instance."""
    return gen_random_lasso(RandomLassoSpec(m=30, n=60, seed=7, sparsity=10))


@pytest.fixture
def small_logreg():
    """Seeded 30 x 10 random logistic instance."""
    return gen_random_logreg(RandomLogRegSpec(m=30, n=10, seed=3, sparsity=4))


@pytest.fixture
def small_logreg_problem(small_logreg):
    return logreg_problem(small_logreg)

