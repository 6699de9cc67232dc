"""Seeded instance generators, dataset files and row/column scaling."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy import sparse

from pipadmm.exceptions import DatasetError, ShapeError
from pipadmm.models import DataFormat, RandomLassoSpec, RandomLogRegSpec, ScalingMode
from pipadmm.problems import LassoInstance, LogRegInstance, prepare_lasso, prepare_logreg

logger = logging.getLogger(__name__)

_LABEL_MAP = {0.0: -1.0, 1.0: 1.0, -1.0: -1.0}


def _substreams(seed: int) -> list[np.random.Generator]:
    """Independent generators for the matrix, the planted vector and the noise."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(3)]


# ----------------------------------------------------------------------
# Dataset
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """A feature matrix with optional labels in {-1, +1}.

    ``scaling_applied`` records the mode used by :func:`apply_scaling`
    (``None`` when unscaled); ``zero_lines`` lists the rows or columns that
    were left untouched because their norm is zero.
    """

    features: Any
    labels: np.ndarray | None = None
    name: str = ""
    scaling_applied: ScalingMode | None = None
    zero_lines: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.features.ndim != 2:
            raise ShapeError(f"features must be a matrix, got {self.features.ndim} dimensions")
        if self.labels is not None and np.shape(self.labels) != (self.features.shape[0],):
            raise ShapeError(
                f"{self.features.shape[0]} samples but {np.shape(self.labels)} labels"
            )

    @property
    def m(self) -> int:
        return int(self.features.shape[0])

    @property
    def n(self) -> int:
        return int(self.features.shape[1])

    def dense_features(self) -> np.ndarray:
        return self.features.toarray() if sparse.issparse(self.features) else np.asarray(self.features)


# ----------------------------------------------------------------------
# Generators
# ----------------------------------------------------------------------


def _unit_columns(C: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(C, axis=0)
    norms[norms == 0] = 1.0
    return C / norms


def _planted(rng: np.random.Generator, n: int, sparsity: int) -> np.ndarray:
    x = np.zeros(n)
    support = rng.choice(n, size=sparsity, replace=False)
    x[support] = rng.standard_normal(sparsity)
    return x


def gen_random_lasso(spec: RandomLassoSpec) -> LassoInstance:
    """``d = C x + noise_scale * y`` with C unit-column Gaussian and x ``sparsity``-sparse."""
    rng_matrix, rng_planted, rng_noise = _substreams(spec.seed)
    C = _unit_columns(rng_matrix.standard_normal((spec.m, spec.n)))
    x = _planted(rng_planted, spec.n, spec.sparsity)
    d = C @ x + spec.noise_scale * rng_noise.standard_normal(spec.m)
    logger.debug("Generated LASSO %dx%d (seed %d)", spec.m, spec.n, spec.seed)
    return prepare_lasso(C, d, scale=False)


def gen_random_logreg(spec: RandomLogRegSpec) -> LogRegInstance:
    """Gaussian features, labels ``sign(C w + noise)``; both classes are always present."""
    rng_matrix, rng_planted, rng_noise = _substreams(spec.seed)
    C = rng_matrix.standard_normal((spec.m, spec.n))
    w = _planted(rng_planted, spec.n, spec.sparsity)
    score = C @ w + spec.noise_scale * rng_noise.standard_normal(spec.m)
    labels = np.where(score >= 0.0, 1.0, -1.0)
    if np.all(labels == labels[0]):
        labels[int(np.argmin(np.abs(score)))] *= -1.0
    ds = apply_scaling(Dataset(C, labels, name=f"random logreg {spec.m}x{spec.n}"), ScalingMode.AUTO)
    return logreg_instance_from_dataset(ds)


# ----------------------------------------------------------------------
# Loading and saving
# ----------------------------------------------------------------------


def _parse_float(cell: str, path: Path, line: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"cannot parse {cell.strip()!r} as a number", path, line) from None
    if not math.isfinite(value):
        raise DatasetError(f"non-finite value {cell.strip()!r}", path, line)
    return value


def _map_label(value: float, path: Path, line: int) -> float:
    if value not in _LABEL_MAP:
        raise DatasetError(f"label {value!r} outside {{-1, 0, 1}}", path, line)
    return _LABEL_MAP[value]


def _label_index(label_column: int | str | None, names: list[str] | None, width: int, path: Path) -> int | None:
    if label_column is None:
        return None
    if isinstance(label_column, str):
        if names is None:
            raise DatasetError(f"label column {label_column!r} given by name but file has no header", path)
        if label_column not in names:
            raise DatasetError(f"no column named {label_column!r}", path)
        return names.index(label_column)
    index = label_column + width if label_column < 0 else label_column
    if not 0 <= index < width:
        raise DatasetError(f"label column {label_column} out of range for {width} columns", path)
    return index


def _load_csv(path: Path, label_column: int | str | None, header: bool) -> tuple[np.ndarray, np.ndarray | None]:
    rows: list[list[float]] = []
    labels: list[float] = []
    names: list[str] | None = None
    width: int | None = None
    label_at: int | None = None

    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            if header and names is None:
                names = [cell.strip() for cell in record]
                continue
            if width is None:
                width = len(record)
                if names is not None and len(names) != width:
                    raise DatasetError(f"header has {len(names)} columns, row has {width}", path, lineno)
                label_at = _label_index(label_column, names, width, path)
            elif len(record) != width:
                raise DatasetError(f"ragged row: expected {width} fields, got {len(record)}", path, lineno)
            values = [_parse_float(cell, path, lineno) for cell in record]
            if label_at is not None:
                labels.append(_map_label(values.pop(label_at), path, lineno))
            rows.append(values)

    if not rows:
        raise DatasetError("no data rows", path)
    features = np.array(rows, dtype=float)
    return features, (np.array(labels) if label_at is not None else None)


def _load_sparse(path: Path) -> tuple[sparse.csr_matrix, np.ndarray]:
    row_idx: list[int] = []
    col_idx: list[int] = []
    values: list[float] = []
    labels: list[float] = []

    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            tokens = raw.split("#", 1)[0].split()
            if not tokens:
                continue
            labels.append(_map_label(_parse_float(tokens[0], path, lineno), path, lineno))
            sample = len(labels) - 1
            for token in tokens[1:]:
                idx, sep, val = token.partition(":")
                if not sep or not idx.isdigit() or int(idx) < 1:
                    raise DatasetError(f"malformed entry {token!r}", path, lineno)
                row_idx.append(sample)
                col_idx.append(int(idx) - 1)
                values.append(_parse_float(val, path, lineno))

    if not labels:
        raise DatasetError("no data rows", path)
    n = max(col_idx) + 1 if col_idx else 1
    matrix = sparse.coo_matrix((values, (row_idx, col_idx)), shape=(len(labels), n)).tocsr()
    return matrix, np.array(labels)


def load_dataset(
    path: str | Path,
    format: DataFormat = DataFormat.CSV,
    label_column: int | str | None = -1,
    header: bool = False,
    name: str | None = None,
) -> Dataset:
    """Read a dataset file.

    Parameters
    ----------
    path : str or Path
        File to read.
    format : DataFormat
        ``CSV`` (comma separated, optional header) or ``SPARSE``
        (``label idx:val ...`` with 1-based indices).
    label_column : int, str or None
        CSV only: label column by index (negative counts from the end) or
        header name; ``None`` for a file without labels.
    header : bool
        CSV only: whether the first non-empty row holds column names.

    Raises
    ------
    DatasetError
        On unreadable entries, NaN/Inf, ragged rows or labels outside
        {-1, 0, 1}; the message names the file and line.
    """
    path = Path(path)
    if format is DataFormat.SPARSE:
        features, labels = _load_sparse(path)
    else:
        features, labels = _load_csv(path, label_column, header)
    logger.info("Loaded %s: %d samples, %d features", path.name, features.shape[0], features.shape[1])
    return Dataset(features=features, labels=labels, name=name or path.stem)


def save_dataset(ds: Dataset, path: str | Path, format: DataFormat = DataFormat.CSV) -> None:
    """Write ``ds`` so that :func:`load_dataset` reads it back bit-exactly.

    CSV puts the label, when present, in the last column.
    """
    path = Path(path)
    if format is DataFormat.SPARSE:
        if ds.labels is None:
            raise DatasetError("the sparse format needs labels", path)
        matrix = sparse.csr_matrix(ds.features)
        with open(path, "w") as fh:
            for i in range(ds.m):
                row = matrix.getrow(i).tocoo()
                entries = " ".join(f"{j + 1}:{v!r}" for j, v in sorted(zip(row.col, row.data.tolist())))
                fh.write(f"{int(ds.labels[i])} {entries}".rstrip() + "\n")
        return

    dense = ds.dense_features()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i, row in enumerate(dense.tolist()):
            cells = [repr(v) for v in row]
            if ds.labels is not None:
                cells.append(str(int(ds.labels[i])))
            writer.writerow(cells)


# ----------------------------------------------------------------------
# Scaling
# ----------------------------------------------------------------------


def apply_scaling(ds: Dataset, mode: ScalingMode = ScalingMode.AUTO) -> Dataset:
    """Scale columns (or rows) of the features to unit 2-norm.

    ``AUTO`` scales columns when ``n >= m`` and rows otherwise.  Zero
    rows/columns are left untouched and listed in ``zero_lines``.
    """
    if ds.scaling_applied is not None:
        raise DatasetError(f"dataset {ds.name!r} is already scaled ({ds.scaling_applied.value})")
    if mode is ScalingMode.AUTO:
        mode = ScalingMode.COLUMNS if ds.n >= ds.m else ScalingMode.ROWS
    axis = 0 if mode is ScalingMode.COLUMNS else 1

    X = ds.features
    if sparse.issparse(X):
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=axis)).ravel())
    else:
        norms = np.linalg.norm(X, axis=axis)
    zero = np.flatnonzero(norms == 0)
    factors = 1.0 / np.where(norms == 0, 1.0, norms)

    if sparse.issparse(X):
        scaled = X @ sparse.diags(factors) if axis == 0 else sparse.diags(factors) @ X
        scaled = sparse.csr_matrix(scaled)
    else:
        scaled = X * factors if axis == 0 else X * factors[:, None]

    if zero.size:
        logger.warning(
            "%s: %d zero %s left unscaled", ds.name or "dataset", zero.size,
            "columns" if axis == 0 else "rows",
        )
    return replace(ds, features=scaled, scaling_applied=mode, zero_lines=tuple(int(i) for i in zero))


# ----------------------------------------------------------------------
# Instance adapters
# ----------------------------------------------------------------------


def lasso_instance_from_dataset(ds: Dataset) -> LassoInstance:
    """LASSO with the labels as response; columns are scaled if not done yet."""
    if ds.labels is None:
        raise DatasetError(f"dataset {ds.name!r} has no labels to regress on")
    if ds.scaling_applied is None:
        ds = apply_scaling(ds, ScalingMode.COLUMNS)
    return prepare_lasso(ds.features, ds.labels, scale=False)


def logreg_instance_from_dataset(ds: Dataset) -> LogRegInstance:
    """Logistic instance with ``delta = 0.5 lambda_max``; AUTO scaling if not done yet."""
    if ds.labels is None:
        raise DatasetError(f"dataset {ds.name!r} has no labels")
    if ds.scaling_applied is None:
        ds = apply_scaling(ds, ScalingMode.AUTO)
    return prepare_logreg(ds.features, ds.labels)
