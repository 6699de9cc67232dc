#!/usr/bin/env python
"""Dump every HPE certificate of a seeded LASSO solve as JSON.

Usage:
    python dump_certificates.py [M N] [THETA]

    Defaults to a 50 x 200 instance with theta = 1.3.
"""

import json
import logging
import sys
from datetime import datetime
from typing import Any

import numpy as np

from pipadmm import HpeMonitor, RandomLassoSpec, SolverConfig, lasso_problem, reference_solution, run
from pipadmm.data import gen_random_lasso
from pipadmm.monitor import MSeminorm, d0_estimate

logging.basicConfig(
    level=logging.WARNING, format="%(levelname)s  %(name)s  %(message)s"
)


class CertificateDumper:
    """Certified solve of one random LASSO instance."""

    def __init__(self, m: int, n: int, theta: float, seed: int = 0):
        self.spec = RandomLassoSpec(m=m, n=n, seed=seed, sparsity=min(100, n))
        self.config = SolverConfig(theta=theta)
        self.data: dict[str, Any] = {}

    def dump_all(self) -> dict:
        """Solve with a monitor attached and collect the certificates."""
        problem = lasso_problem(gen_random_lasso(self.spec))

        print("📐 Computing reference solution...", file=sys.stderr)
        reference = reference_solution(problem, self.config)
        start = (np.zeros(problem.x_dim), np.zeros(problem.y_dim), np.zeros(problem.c_dim))
        d0 = d0_estimate(start, reference.z, MSeminorm.for_problem(problem, self.config))

        print("🔎 Running certified solve...", file=sys.stderr)
        monitor = HpeMonitor(problem, self.config, d0)
        result = run(problem, self.config, monitor=monitor)

        self.data["timestamp"] = datetime.now().isoformat()
        self.data["instance"] = self.spec.model_dump()
        self.data["config"] = self.config.model_dump(mode="json")
        self.data["constants"] = {
            "sigma": monitor.sigma,
            "mu": monitor.mu,
            "eta0": monitor.eta0,
            "d0": d0,
        }
        self.data["result"] = {
            "status": result.status.value,
            "outer": result.outer_count,
            "inner": result.total_inner_count,
            "final_step_norm": result.final_step_norm,
        }
        self.data["violations"] = monitor.violations()
        self.data["certificates"] = [row.model_dump() for row in monitor.rows]
        return self.data


def main():
    """Main entry point."""
    m, n, theta = 50, 200, 1.3
    try:
        if len(sys.argv) >= 3:
            m, n = int(sys.argv[1]), int(sys.argv[2])
        if len(sys.argv) >= 4:
            theta = float(sys.argv[3])
    except ValueError:
        print(
            "❌ Error: M, N must be integers and THETA a number\n"
            "Usage: python dump_certificates.py [M N] [THETA]",
            file=sys.stderr,
        )
        sys.exit(1)

    dumper = CertificateDumper(m, n, theta)

    try:
        data = dumper.dump_all()
        print(json.dumps(data, indent=2, default=str))
    except Exception as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
