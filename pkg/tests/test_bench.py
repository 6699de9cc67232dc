"""Tests for the benchmark harness and the command-line entry point."""

import json
from unittest.mock import patch

import pytest

from pipadmm.bench import (
    TABLE_HEADERS,
    certificate_path,
    emit_summary,
    emit_table,
    read_table_csv,
    run_bench,
    summarize,
)
from pipadmm.cli import EXIT_FAILED, EXIT_OK, main
from pipadmm.data import gen_random_lasso
from pipadmm.exceptions import DomainError, InnerSolveError
from pipadmm.models import BenchRow, EmitFormat, Method, ProblemKind, RandomLassoSpec, RunSpec, SolverConfig
from pipadmm.problems import lasso_objective, lasso_problem
from pipadmm.solver import reference_solution


def _row(**kwargs):
    fields = {"dataset": "toy", "method": Method.PIP, "theta": 1.0, "outer": 10, "inner": 50, "time": 0.5}
    fields.update(kwargs)
    return BenchRow(**fields)


@pytest.fixture
def small_spec():
    """Two PIP thetas and the baseline on a seeded 20 x 40 LASSO."""
    return RunSpec(
        random=(20, 40),
        seed=3,
        methods=[(Method.PIP, 1.0), (Method.PIP, 1.3), (Method.RELERR_BASELINE, 1.0)],
    )


class TestRunBench:
    """Test batches of solves."""

    def test_rows_in_order(self, small_spec):
        """Test one row per (instance, method) pair in the requested order."""
        rows = run_bench(small_spec)
        assert [(r.method, r.theta) for r in rows] == small_spec.methods
        assert all(r.dataset == "lasso 20x40" and r.seed == 3 for r in rows)
        assert all(r.status == "converged" for r in rows)
        assert all(r.objective is not None and r.inner >= r.outer for r in rows)

    def test_deterministic_counts(self, small_spec):
        """Test repeated runs give identical Out/Inner counts."""
        first = run_bench(small_spec)
        second = run_bench(small_spec)
        assert [(r.outer, r.inner) for r in first] == [(r.outer, r.inner) for r in second]

    def test_repetitions_use_consecutive_seeds(self):
        """Test reps draw seeds seed, seed + 1, ..."""
        rows = run_bench(RunSpec(random=(15, 30), seed=4, reps=2))
        assert [r.seed for r in rows] == [4, 5]

    def test_logreg(self):
        """Test a logistic batch."""
        rows = run_bench(RunSpec(problem=ProblemKind.LOGREG, random=(20, 6)))
        assert rows[0].dataset == "logreg 20x6"
        assert not rows[0].failed

    def test_certify_leaves_counts(self, small_spec, tmp_path):
        """Test certified solves match plain ones and write the certificate file."""
        plain = run_bench(small_spec)
        output = tmp_path / "bench.csv"
        certified = run_bench(small_spec.model_copy(update={"certify": True, "output": output}))
        assert [(r.outer, r.inner) for r in certified] == [(r.outer, r.inner) for r in plain]

        cert_lines = certificate_path(output).read_text().splitlines()
        assert cert_lines[0].startswith("dataset,method,theta,seed,k,slack,")
        assert len(cert_lines) == 1 + sum(r.outer for r in certified)

    def test_failure_recorded(self, small_spec):
        """Test an inner failure marks the row and the batch continues."""
        with patch("pipadmm.bench.run", side_effect=InnerSolveError(3, "boom")):
            rows = run_bench(small_spec)
        assert len(rows) == 3
        assert all(r.status == "error" and r.failed for r in rows)

    def test_objective_at_primal_solution(self, small_spec):
        """Test the reported objective matches the optimal LASSO value, not the value at x."""
        rows = run_bench(small_spec)
        inst = gen_random_lasso(RandomLassoSpec(m=20, n=40, seed=3, sparsity=40))
        config = SolverConfig()
        ref = reference_solution(lasso_problem(inst), config)
        optimum = lasso_objective(inst, ref.y)
        for row in rows:
            assert row.objective == pytest.approx(optimum, rel=1e-2), rows

    def test_writes_output(self, small_spec, tmp_path):
        """Test the CSV output file restores the rows."""
        output = tmp_path / "rows.csv"
        rows = run_bench(small_spec.model_copy(update={"output": output}))
        back = read_table_csv(output.read_text())
        assert [r.model_dump() for r in back] == [r.model_dump() for r in rows]


class TestTables:
    """Test table rendering and summaries."""

    def test_csv_round_trip(self):
        """Test CSV output parses back to equal rows, None included."""
        rows = [_row(objective=1.0 / 3.0, m_step_norm=1e-3, seed=0), _row(status="error", outer=0, inner=0)]
        back = read_table_csv(emit_table(rows, EmitFormat.CSV))
        assert [r.model_dump() for r in back] == [r.model_dump() for r in rows]

    def test_text_headers(self):
        """Test the text table names the comparison columns."""
        text = emit_table([_row(method=Method.RELERR_BASELINE)])
        header = text.splitlines()[0].split()
        assert header == list(TABLE_HEADERS)
        assert "relerr-ADMM" in text

    def test_markdown(self):
        """Test the markdown table layout."""
        lines = emit_table([_row(), _row(theta=1.6)], EmitFormat.MARKDOWN).splitlines()
        assert lines[0].startswith("| Dataset | Method | θ |")
        assert lines[1].startswith("|---|")
        assert len(lines) == 4

    def test_empty(self):
        """Test rendering nothing is an error."""
        with pytest.raises(DomainError):
            emit_table([])
        with pytest.raises(DomainError):
            emit_summary([])

    def test_summarize(self):
        """Test means and ranges over successful rows only."""
        rows = [
            _row(outer=10, inner=40),
            _row(outer=20, inner=60),
            _row(outer=0, inner=0, status="error"),
            _row(theta=1.6, outer=5, inner=30),
        ]
        summaries = summarize(rows)
        assert len(summaries) == 2
        first = summaries[0]
        assert first.reps == 2
        assert first.out_mean == 15.0
        assert (first.inner_min, first.inner_max) == (40, 60)
        assert "10-20" in emit_summary(summaries)


class TestCli:
    """Test the pipadmm-bench entry point."""

    def test_random_lasso(self, capsys):
        """Test a broadcast method with several thetas."""
        assert main(["--random", "20,40", "--theta", "1", "--theta", "1.3"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("PIP-ADMM") == 2

    def test_failed_row_exit_code(self, capsys):
        """Test any failed row yields exit code 2."""
        with patch("pipadmm.cli.run_bench", return_value=[_row(status="error")]):
            assert main(["--random", "20,40"]) == EXIT_FAILED

    def test_unpaired_methods(self, capsys):
        """Test method/theta lists that cannot be paired."""
        argv = ["--random", "20,40", "--method", "pip", "--method", "relerr"]
        argv += ["--theta", "1", "--theta", "1.3", "--theta", "1.6"]
        with pytest.raises(SystemExit) as exc_info:
            main(argv)
        assert exc_info.value.code == 2

    def test_source_required(self, capsys):
        """Test one of --random or --dataset is required."""
        with pytest.raises(SystemExit):
            main([])

    def test_out_and_emit(self, tmp_path, capsys):
        """Test --out writes CSV rows and --emit csv prints them."""
        output = tmp_path / "out.csv"
        assert main(["--random", "15,30", "--emit", "csv", "--out", str(output)]) == EXIT_OK
        rows = read_table_csv(output.read_text())
        assert len(rows) == 1
        assert capsys.readouterr().out.startswith("dataset,method,theta,")

    def test_config_file(self, tmp_path, capsys):
        """Test settings and the method pairing come from a JSON file."""
        config = tmp_path / "solver.json"
        config.write_text(json.dumps({"beta": 2.0, "theta": 1.3}))
        output = tmp_path / "out.csv"
        assert main(["--random", "15,30", "--config", str(config), "--out", str(output)]) == EXIT_OK
        assert read_table_csv(output.read_text())[0].theta == 1.3

    def test_invalid_config(self, tmp_path, capsys):
        """Test an invalid JSON config is rejected."""
        config = tmp_path / "solver.json"
        config.write_text(json.dumps({"beta": -1.0}))
        with pytest.raises(SystemExit):
            main(["--random", "15,30", "--config", str(config)])

    def test_dataset_error(self, tmp_path, capsys):
        """Test an unreadable dataset exits with code 2."""
        path = tmp_path / "bad.csv"
        path.write_text("1.0,nan,1\n")
        assert main(["--dataset", str(path)]) == EXIT_FAILED
        assert "bad.csv:1:" in capsys.readouterr().err
