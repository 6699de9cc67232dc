"""Tests for configuration and record models."""

import pytest
from pydantic import ValidationError

from pipadmm.models import (
    BenchRow,
    HpeCertificate,
    Method,
    RandomLassoSpec,
    RunSpec,
    SolverConfig,
    SolveStatus,
    TraceRecord,
)


class TestSolverConfig:
    """Test SolverConfig validation and defaults."""

    def test_defaults(self):
        """Test the experiment defaults."""
        config = SolverConfig()
        assert config.beta == 1.0
        assert config.theta == 1.0
        assert config.tau2 == pytest.approx(1 - 1e-8)
        assert config.outer_tol == 1e-2
        assert config.inner_abs_tol == 1e-8
        assert config.method is Method.PIP

    def test_tau1_resolves_from_theta(self):
        """Test that an unset tau1 follows the default rule for PIP."""
        assert SolverConfig(theta=1.0).tau1 == pytest.approx(0.99)
        assert SolverConfig(theta=1.3).tau1 == pytest.approx(0.663626, abs=1e-6)
        assert SolverConfig(theta=1.6).tau1 == pytest.approx(0.061875, rel=1e-9)

    def test_baseline_tau1(self):
        """Test that the baseline defaults to tau1 = 0.99."""
        config = SolverConfig(method=Method.RELERR_BASELINE)
        assert config.relative_tolerances == (0.99, config.tau2)

    def test_baseline_rejects_theta(self):
        """Test that the baseline only runs with theta = 1."""
        with pytest.raises(ValidationError):
            SolverConfig(method="relerr", theta=1.3)

    def test_theta_above_bound_rejected(self):
        """Test the stepsize condition."""
        with pytest.raises(ValidationError):
            SolverConfig(theta=1.6, tau1=0.99)
        with pytest.raises(ValidationError):
            SolverConfig(theta=1.7)

    def test_tolerances_out_of_range(self):
        """Test tau ranges and positivity constraints."""
        with pytest.raises(ValidationError):
            SolverConfig(tau2=1.0)
        with pytest.raises(ValidationError):
            SolverConfig(tau1=-0.1)
        with pytest.raises(ValidationError):
            SolverConfig(beta=0.0)

    def test_extra_fields_forbidden(self):
        """Test that unknown settings are rejected."""
        with pytest.raises(ValidationError):
            SolverConfig(penalty=2.0)

    def test_inner_budget(self):
        """Test the default inner budget of 10 * x_dim."""
        assert SolverConfig().inner_budget(40) == 400
        assert SolverConfig(max_inner=7).inner_budget(40) == 7

    def test_from_json(self):
        """Test parsing a JSON config."""
        config = SolverConfig.model_validate_json('{"beta": 2.0, "theta": 1.3}')
        assert config.beta == 2.0
        assert config.tau1 == pytest.approx(0.663626, abs=1e-6)


class TestRecords:
    """Test trace and certificate records."""

    def test_trace_record(self):
        """Test a trace record without a monitor."""
        record = TraceRecord(k=1, m_step_norm=0.5, inner_iters=3)
        assert record.hpe_slack is None

    def test_trace_record_rejects_k0(self):
        """Test that iteration numbers start at 1."""
        with pytest.raises(ValidationError):
            TraceRecord(k=0, m_step_norm=0.5, inner_iters=3)

    def test_certificate_holds(self):
        """Test the relative slack tolerance."""
        cert = HpeCertificate(sigma=0.5, mu=2.0, eta_prev=0.0, eta_curr=0.0, slack=-1e-9, scale=1.0)
        assert cert.holds
        cert = HpeCertificate(sigma=0.5, mu=2.0, eta_prev=0.0, eta_curr=0.0, slack=-1e-6, scale=1.0)
        assert not cert.holds


class TestInstanceSpecs:
    """Test instance and run specifications."""

    def test_sparsity_bound(self):
        """Test that the planted support fits in n."""
        with pytest.raises(ValidationError):
            RandomLassoSpec(m=10, n=50, sparsity=100)
        assert RandomLassoSpec(m=10, n=200).sparsity == 100

    def test_run_spec_requires_one_source(self):
        """Test that exactly one instance source is given."""
        with pytest.raises(ValidationError):
            RunSpec()
        with pytest.raises(ValidationError):
            RunSpec(random=(10, 20), dataset="x.csv")

    def test_run_spec_validates_theta(self):
        """Test that each theta is checked against its default tau1."""
        RunSpec(random=(10, 20), methods=[(Method.PIP, 1.6)])
        with pytest.raises(ValidationError):
            RunSpec(random=(10, 20), methods=[(Method.PIP, 1.7)])
        with pytest.raises(ValidationError):
            RunSpec(random=(10, 20), methods=[(Method.RELERR_BASELINE, 1.3)])

    def test_bench_row_failed(self):
        """Test which statuses count as failures."""
        ok = BenchRow(dataset="d", method="pip", theta=1.0, outer=3, inner=9, time=0.1)
        capped = ok.model_copy(update={"status": SolveStatus.MAX_ITER.value})
        broken = ok.model_copy(update={"status": SolveStatus.INNER_FAILURE.value})
        assert not ok.failed
        assert not capped.failed
        assert broken.failed
