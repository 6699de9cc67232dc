"""Benchmark harness: batches of solves, result tables and certificate reports."""

from __future__ import annotations

import csv
import io
import logging
import statistics
import time
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from pipadmm.data import (
    Dataset,
    gen_random_lasso,
    gen_random_logreg,
    lasso_instance_from_dataset,
    load_dataset,
    logreg_instance_from_dataset,
)
from pipadmm.exceptions import DomainError, PipAdmmError
from pipadmm.models import (
    BenchRow,
    BenchSummary,
    EmitFormat,
    Method,
    ProblemKind,
    RandomLassoSpec,
    RandomLogRegSpec,
    RunSpec,
    SolverConfig,
)
from pipadmm.monitor import HpeMonitor, MSeminorm, d0_estimate, write_certificate_csv
from pipadmm.problems import lasso_problem, logreg_problem
from pipadmm.solver import reference_solution, run
from pipadmm.splitting import SplitProblem

logger = logging.getLogger(__name__)

TABLE_HEADERS = ("Dataset", "Method", "θ", "Out", "Inner", "Time", "Objective", "Status")
SUMMARY_HEADERS = ("Dataset", "Method", "θ", "Reps", "Out", "Out range", "Inner", "Inner range", "Time")
METHOD_LABELS = {Method.PIP: "PIP-ADMM", Method.RELERR_BASELINE: "relerr-ADMM"}


@dataclass
class _Instance:
    label: str
    seed: int | None
    problem: SplitProblem


def certificate_path(output: Path) -> Path:
    """``<out>.cert.csv`` next to the bench output."""
    return output.with_name(output.name + ".cert.csv")


# ----------------------------------------------------------------------
# Running
# ----------------------------------------------------------------------


def _instances(spec: RunSpec) -> Iterator[_Instance]:
    if spec.dataset is not None:
        ds: Dataset = load_dataset(spec.dataset, spec.data_format, spec.label_column, spec.header)
        if spec.problem is ProblemKind.LASSO:
            problem = lasso_problem(lasso_instance_from_dataset(ds))
        else:
            problem = logreg_problem(logreg_instance_from_dataset(ds))
        for _ in range(spec.reps):
            yield _Instance(ds.name, None, problem)
        return

    assert spec.random is not None
    m, n = spec.random
    for rep in range(spec.reps):
        seed = spec.seed + rep
        if spec.problem is ProblemKind.LASSO:
            inst = gen_random_lasso(RandomLassoSpec(m=m, n=n, seed=seed, sparsity=min(100, n)))
            yield _Instance(f"lasso {m}x{n}", seed, lasso_problem(inst))
        else:
            logreg = gen_random_logreg(RandomLogRegSpec(m=m, n=n, seed=seed, sparsity=min(10, n)))
            yield _Instance(f"logreg {m}x{n}", seed, logreg_problem(logreg))


def _certify(problem: SplitProblem, config: SolverConfig) -> HpeMonitor:
    reference = reference_solution(problem, config)
    start = (np.zeros(problem.x_dim), np.zeros(problem.y_dim), np.zeros(problem.c_dim))
    d0 = d0_estimate(start, reference.z, MSeminorm.for_problem(problem, config))
    return HpeMonitor(problem, config, d0)


def _solve_row(
    instance: _Instance,
    method: Method,
    theta: float,
    spec: RunSpec,
    cert_file: Path | None,
) -> BenchRow:
    base = {"dataset": instance.label, "method": method, "theta": theta, "seed": instance.seed}
    try:
        config = SolverConfig.model_validate({**spec.overrides, "method": method, "theta": theta})
        monitor = _certify(instance.problem, config) if spec.certify else None
        started = time.perf_counter()
        result = run(instance.problem, config, monitor=monitor)
        elapsed = time.perf_counter() - started
    except (PipAdmmError, ValidationError) as exc:
        logger.warning("%s %s theta=%g failed: %s", instance.label, method.value, theta, exc)
        return BenchRow(**base, outer=0, inner=0, time=0.0, status="error")

    if monitor is not None:
        for violation in monitor.violations():
            logger.warning("%s %s theta=%g: %s", instance.label, method.value, theta, violation)
        if cert_file is not None:
            write_certificate_csv(
                monitor.rows,
                cert_file,
                context={k: (v.value if isinstance(v, Method) else v) for k, v in base.items()},
                append=cert_file.exists(),
            )

    final = result.final_iterate
    return BenchRow(
        **base,
        outer=result.outer_count,
        inner=result.total_inner_count,
        time=elapsed,
        objective=instance.problem.objective(final.x_tilde, final.y),
        m_step_norm=result.final_step_norm,
        status=result.status.value,
    )


def run_bench(spec: RunSpec) -> list[BenchRow]:
    """Solve every instance of ``spec`` with every (method, theta) pair.

    Rows come back repetition-major, methods in ``spec.methods`` order.  Failures are recorded
    in the row's status and never stop the batch.  With ``spec.certify`` each
    solve is monitored against a reference solve and, when ``spec.output``
    is set, the certificates are written to ``<output>.cert.csv``.
    """
    cert_file = certificate_path(spec.output) if spec.certify and spec.output else None
    if cert_file is not None and cert_file.exists():
        cert_file.unlink()

    rows: list[BenchRow] = []
    for instance in _instances(spec):
        for method, theta in spec.methods:
            row = _solve_row(instance, method, theta, spec, cert_file)
            logger.info(
                "%s %s theta=%g: out=%d inner=%d status=%s",
                row.dataset, row.method.value, row.theta, row.outer, row.inner, row.status,
            )
            rows.append(row)

    if spec.output is not None:
        spec.output.write_text(emit_table(rows, EmitFormat.CSV))
    return rows


# ----------------------------------------------------------------------
# Tables
# ----------------------------------------------------------------------


def _fmt(value: float | None, spec: str) -> str:
    return "" if value is None else format(value, spec)


def _csv_cell(value: object) -> str:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def _render(headers: Sequence[str], body: list[list[str]], fmt: EmitFormat) -> str:
    if fmt is EmitFormat.CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(body)
        return buf.getvalue()
    if fmt is EmitFormat.MARKDOWN:
        lines = ["| " + " | ".join(headers) + " |", "|" + "|".join("---" for _ in headers) + "|"]
        lines += ["| " + " | ".join(cells) + " |" for cells in body]
        return "\n".join(lines) + "\n"
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip() for cells in body]
    return "\n".join(lines) + "\n"


def emit_table(rows: Sequence[BenchRow], format: EmitFormat = EmitFormat.TEXT) -> str:
    """Render bench rows.

    CSV uses the :class:`BenchRow` field order with lossless floats so that
    :func:`read_table_csv` restores the rows exactly; TEXT and MARKDOWN show
    the Out/Inner/Time comparison columns.
    """
    if not rows:
        raise DomainError("no rows to emit")
    if format is EmitFormat.CSV:
        fields = list(BenchRow.model_fields)
        body = [[_csv_cell(row.model_dump(mode="json")[f]) for f in fields] for row in rows]
        return _render(fields, body, format)

    body = [
        [
            row.dataset,
            METHOD_LABELS[row.method],
            f"{row.theta:g}",
            str(row.outer),
            str(row.inner),
            f"{row.time:.2f}",
            _fmt(row.objective, ".6g"),
            row.status,
        ]
        for row in rows
    ]
    return _render(TABLE_HEADERS, body, format)


def read_table_csv(text: str) -> list[BenchRow]:
    """Parse the CSV produced by :func:`emit_table`."""
    reader = csv.DictReader(io.StringIO(text))
    return [
        BenchRow.model_validate({k: (None if v == "" else v) for k, v in record.items()})
        for record in reader
    ]


def summarize(rows: Sequence[BenchRow]) -> list[BenchSummary]:
    """Mean and range of Out/Inner per (dataset, method, theta) over successful rows."""
    groups: dict[tuple[str, Method, float], list[BenchRow]] = {}
    for row in rows:
        if not row.failed:
            groups.setdefault((row.dataset, row.method, row.theta), []).append(row)
    summaries = []
    for (dataset, method, theta), members in groups.items():
        outs = [r.outer for r in members]
        inners = [r.inner for r in members]
        summaries.append(
            BenchSummary(
                dataset=dataset,
                method=method,
                theta=theta,
                reps=len(members),
                out_mean=statistics.fmean(outs),
                out_min=min(outs),
                out_max=max(outs),
                inner_mean=statistics.fmean(inners),
                inner_min=min(inners),
                inner_max=max(inners),
                time_mean=statistics.fmean(r.time for r in members),
            )
        )
    return summaries


def emit_summary(summaries: Sequence[BenchSummary], format: EmitFormat = EmitFormat.TEXT) -> str:
    if not summaries:
        raise DomainError("no summaries to emit")
    body = [
        [
            s.dataset,
            METHOD_LABELS[s.method],
            f"{s.theta:g}",
            str(s.reps),
            f"{s.out_mean:.1f}",
            f"{s.out_min}-{s.out_max}",
            f"{s.inner_mean:.1f}",
            f"{s.inner_min}-{s.inner_max}",
            f"{s.time_mean:.2f}",
        ]
        for s in summaries
    ]
    return _render(SUMMARY_HEADERS, body, format)
