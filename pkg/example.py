"""Quick demo of the pipadmm solver on a seeded random LASSO.

Usage:
    python example.py [M N] [SEED]

    Defaults to a 300 x 1000 instance with seed 0.
"""

import logging
import sys

from pipadmm import (
    Method,
    PipAdmmSolver,
    RandomLassoSpec,
    SolverConfig,
    lasso_problem,
)
from pipadmm.data import gen_random_lasso
from pipadmm.problems import lasso_objective

logging.basicConfig(level=logging.INFO, format="%(levelname)s  %(name)s  %(message)s")

m, n, seed = 300, 1000, 0
if len(sys.argv) >= 3:
    m, n = int(sys.argv[1]), int(sys.argv[2])
if len(sys.argv) >= 4:
    seed = int(sys.argv[3])

instance = gen_random_lasso(RandomLassoSpec(m=m, n=n, seed=seed, sparsity=min(100, n)))
problem = lasso_problem(instance)

print(f"\n{'='*60}")
print(f"Instance: {problem.name} (seed {seed})")
print(f"delta:    {instance.delta:.6g}")

# --- PIP-ADMM at three stepsizes, then the relative-error baseline ---
for method, theta in ((Method.PIP, 1.0), (Method.PIP, 1.3), (Method.PIP, 1.6), (Method.RELERR_BASELINE, 1.0)):
    config = SolverConfig(method=method, theta=theta)
    result = PipAdmmSolver(problem, config).run()
    final = result.final_iterate
    print(f"\n--- {method.value} theta={theta:g} ---")
    print(f"  Status:    {result.status.value}")
    print(f"  Out/Inner: {result.outer_count}/{result.total_inner_count}")
    print(f"  Objective: {lasso_objective(instance, final.y):.8g}")
    print(f"  Nonzeros:  {int((final.y != 0).sum())} of {n}")

print(f"\n{'='*60}")
