"""``pipadmm-bench``: run a benchmark batch from the command line.

Usage::

    pipadmm-bench --random 900,3000 --method pip --theta 1 --theta 1.3 --theta 1.6
    pipadmm-bench --problem logreg --dataset colon.csv --label-col 0 --emit markdown

Exit code 0 when every row converged or hit the iteration limit, 2 when
any row failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from pipadmm.bench import emit_summary, emit_table, run_bench, summarize
from pipadmm.exceptions import PipAdmmError
from pipadmm.models import DataFormat, EmitFormat, Method, ProblemKind, RunSpec, SolverConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 2


def _dims(text: str) -> tuple[int, int]:
    try:
        m, n = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected M,N, got {text!r}") from None
    return m, n


def _label_col(text: str) -> int | str:
    try:
        return int(text)
    except ValueError:
        return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pipadmm-bench",
        description="Partially inexact proximal ADMM: Out/Inner/Time benchmark tables.",
    )
    p.add_argument("--problem", choices=[k.value for k in ProblemKind], default=ProblemKind.LASSO.value)

    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--random", type=_dims, metavar="M,N", help="Seeded random instance of size M x N.")
    source.add_argument("--dataset", type=Path, metavar="PATH", help="Dataset file.")
    p.add_argument("--format", choices=[f.value for f in DataFormat], default=DataFormat.CSV.value)
    p.add_argument("--label-col", type=_label_col, default=-1, help="Label column index or header name.")
    p.add_argument("--header", action="store_true", help="CSV file starts with a header row.")

    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1, help="Repetitions (seeds seed, seed+1, ...).")
    p.add_argument("--method", action="append", choices=[m.value for m in Method], help="Repeatable.")
    p.add_argument("--theta", action="append", type=float, help="Repeatable, paired with --method.")

    p.add_argument("--config", type=Path, help="JSON file with solver settings.")
    p.add_argument("--beta", type=float)
    p.add_argument("--outer-tol", type=float)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--max-inner", type=int)

    p.add_argument("--certify", action="store_true", help="Check the HPE certificates of every solve.")
    p.add_argument("--out", type=Path, help="Write the rows as CSV (certificates go to <out>.cert.csv).")
    p.add_argument("--emit", choices=[e.value for e in EmitFormat], default=EmitFormat.TEXT.value)
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    return p


def _methods(
    parser: argparse.ArgumentParser, methods: list[str] | None, thetas: list[float] | None
) -> list[tuple[Method, float]]:
    methods = methods or [Method.PIP.value]
    thetas = thetas or [1.0]
    if len(methods) == 1:
        methods = methods * len(thetas)
    elif len(thetas) == 1:
        thetas = thetas * len(methods)
    if len(methods) != len(thetas):
        parser.error(f"{len(methods)} --method values cannot be paired with {len(thetas)} --theta values")
    return [(Method(m), t) for m, t in zip(methods, thetas)]


def _overrides(parser: argparse.ArgumentParser, args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    if args.config is not None:
        try:
            text = args.config.read_text()
            SolverConfig.model_validate_json(text)
            overrides = json.loads(text)
        except (OSError, ValidationError) as exc:
            parser.error(f"invalid config {args.config}: {exc}")
        if args.method is None and "method" in overrides:
            args.method = [overrides["method"]]
        if args.theta is None and "theta" in overrides:
            args.theta = [float(overrides["theta"])]
        overrides.pop("method", None)
        overrides.pop("theta", None)
    for key in ("beta", "outer_tol", "max_outer", "max_inner"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    return overrides


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s  %(name)s  %(message)s",
    )

    overrides = _overrides(parser, args)
    try:
        spec = RunSpec(
            problem=ProblemKind(args.problem),
            random=args.random,
            dataset=args.dataset,
            data_format=DataFormat(args.format),
            label_column=args.label_col,
            header=args.header,
            seed=args.seed,
            reps=args.reps,
            methods=_methods(parser, args.method, args.theta),
            overrides=overrides,
            output=args.out,
            certify=args.certify,
        )
    except ValidationError as exc:
        parser.error(str(exc))

    try:
        rows = run_bench(spec)
    except PipAdmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    emit = EmitFormat(args.emit)
    print(emit_table(rows, emit), end="")
    if spec.reps > 1:
        summaries = summarize(rows)
        if summaries:
            print()
            print(emit_summary(summaries, emit), end="")

    failed = [row for row in rows if row.failed]
    if failed:
        logger.warning("%d of %d rows failed", len(failed), len(rows))
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
