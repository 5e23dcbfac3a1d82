"""Dataset container, CSV ingestion, column subsetting and splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyFile,
    IndexOutOfRange,
    MissingColumn,
    NonNumericCell,
    OutOfRange,
    TargetBoundViolated,
)

REGRESSION = "regression"
CLASSIFICATION = "classification"


@dataclass(frozen=True)
class TaskKind:
    """Regression (with target bound ``bound``) or classification.

    ``bound=None`` on a regression task means "derive it from the data"; every
    loaded :class:`Dataset` carries a concrete positive bound.
    """

    kind: str
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in (REGRESSION, CLASSIFICATION):
            raise OutOfRange(f"unknown task kind {self.kind!r}")
        if self.bound is not None:
            if self.kind == CLASSIFICATION:
                raise OutOfRange("classification tasks carry no target bound")
            if not (math.isfinite(self.bound) and self.bound > 0):
                raise OutOfRange(f"target bound must be finite and > 0, got {self.bound}")

    @classmethod
    def regression(cls, bound: float | None = None) -> "TaskKind":
        return cls(REGRESSION, bound)

    @classmethod
    def classification(cls) -> "TaskKind":
        return cls(CLASSIFICATION)

    @property
    def is_regression(self) -> bool:
        return self.kind == REGRESSION

    @property
    def is_classification(self) -> bool:
        return self.kind == CLASSIFICATION

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bound": self.bound}


def index_set(indices: Iterable[int], d: int) -> tuple[int, ...]:
    """Validate feature indices against ``d`` and return them sorted, deduplicated."""
    out = sorted({int(i) for i in indices})
    for i in out:
        if not 0 <= i < d:
            raise IndexOutOfRange(f"feature index {i} outside [0, {d})")
    return tuple(out)


def complement(indices: Iterable[int], d: int) -> tuple[int, ...]:
    chosen = set(index_set(indices, d))
    return tuple(i for i in range(d) if i not in chosen)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable N x d feature matrix plus a target column.

    For classification ``target`` holds dense integer label indices and
    ``class_labels`` maps them back to the original strings.
    """

    features: np.ndarray
    feature_names: tuple[str, ...]
    target: np.ndarray
    task: TaskKind
    target_name: str = "y"
    class_labels: tuple[str, ...] = ()
    standardized: bool = False
    degenerate_columns: tuple[int, ...] = field(default=())

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2:
            raise OutOfRange("features must be a 2-D array")
        n, d = x.shape
        if n < 1:
            raise EmptyFile("dataset has no rows")
        if len(self.feature_names) != d:
            raise OutOfRange(f"{len(self.feature_names)} names for {d} columns")
        if not np.all(np.isfinite(x)):
            raise OutOfRange("features contain NaN or infinite values")
        if self.task.is_classification:
            y = np.asarray(self.target)
            if not np.issubdtype(y.dtype, np.integer):
                raise OutOfRange("classification target must hold integer label indices")
            y = y.astype(np.int64)
            m = len(self.class_labels) if self.class_labels else int(y.max()) + 1
            if m < 2:
                raise OutOfRange("classification needs at least two classes")
            if y.min() < 0 or y.max() >= m:
                raise OutOfRange("label index outside the class set")
            if not self.class_labels:
                object.__setattr__(self, "class_labels", tuple(str(i) for i in range(m)))
        else:
            y = np.asarray(self.target, dtype=np.float64)
            if not np.all(np.isfinite(y)):
                raise OutOfRange("target contains NaN or infinite values")
            if self.task.bound is None:
                object.__setattr__(self, "task", TaskKind.regression(_auto_bound(y)))
        if y.shape != (n,):
            raise OutOfRange(f"target length {y.shape} does not match {n} rows")
        if self.task.is_regression and np.max(np.abs(y)) > self.task.bound:
            raise TargetBoundViolated(
                f"max |y| = {np.max(np.abs(y))} exceeds bound B = {self.task.bound}"
            )
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "target", _frozen(y))
        object.__setattr__(self, "feature_names", tuple(str(s) for s in self.feature_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    def rows(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, features=self.features[idx], target=self.target[idx])


def _auto_bound(y: np.ndarray) -> float:
    b = float(np.max(np.abs(y)))
    return b if b > 0 else 1.0


def subset(ds: Dataset, indices: Iterable[int]) -> Dataset:
    """Restrict ``ds`` to the given feature columns, kept in ascending index order."""
    cols = index_set(indices, ds.n_features)
    degenerate = tuple(cols.index(c) for c in ds.degenerate_columns if c in cols)
    return replace(
        ds,
        features=ds.features[:, list(cols)].reshape(ds.n_samples, len(cols)),
        feature_names=tuple(ds.feature_names[c] for c in cols),
        degenerate_columns=degenerate,
    )


def load_csv(path: str | Path, target_column: str, task: TaskKind) -> Dataset:
    """Read a header-first CSV file.

    Feature cells must parse as floats. A classification target may hold any
    strings; labels are mapped to dense indices in order of first appearance.
    A regression task with ``bound=None`` gets ``B = max |y|``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path} is empty")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise MissingColumn(f"target column {target_column!r} not in {path}")
        t = header.index(target_column)
        feat_cols = [j for j in range(len(header)) if j != t]
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path} has a header but no data rows")

    x = np.empty((len(rows), len(feat_cols)), dtype=np.float64)
    raw_target = []
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise NonNumericCell(r, "<row>", ",".join(row))
        for out_j, j in enumerate(feat_cols):
            x[r - 1, out_j] = _parse_float(row[j], r, header[j])
        raw_target.append(row[t].strip())

    names = tuple(header[j] for j in feat_cols)
    if task.is_classification:
        labels: dict[str, int] = {}
        y = np.array([labels.setdefault(v, len(labels)) for v in raw_target], dtype=np.int64)
        return Dataset(x, names, y, task, target_column, tuple(labels))
    y = np.array([_parse_float(v, r, target_column) for r, v in enumerate(raw_target, 1)])
    if task.bound is not None and np.max(np.abs(y)) > task.bound:
        raise TargetBoundViolated(
            f"max |y| = {np.max(np.abs(y))} exceeds explicit bound B = {task.bound}"
        )
    return Dataset(x, names, y, task, target_column)


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise NonNumericCell(row, col, cell) from None
    if not math.isfinite(v):
        raise NonNumericCell(row, col, cell)
    return v


def write_csv(ds: Dataset, path: str | Path) -> None:
    """Write ``ds`` in the format :func:`load_csv` reads; floats use ``repr`` so reloads are exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ds.feature_names, ds.target_name])
        for row, y in zip(ds.features, ds.target):
            tail = ds.class_labels[int(y)] if ds.task.is_classification else repr(float(y))
            w.writerow([repr(float(v)) for v in row] + [tail])


def _seed32(seed: int) -> int:
    # sklearn only takes 32-bit seeds
    return int(np.random.SeedSequence(int(seed)).generate_state(1)[0])


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic row partition; stratified by class for classification."""
    from sklearn.model_selection import train_test_split as _sk_split

    if not 0 < test_fraction < 1:
        raise DegenerateSplit(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = ds.n_samples
    if n < 2:
        raise DegenerateSplit("need at least two rows to split")
    n_test = int(round(test_fraction * n))
    if not 1 <= n_test <= n - 1:
        raise DegenerateSplit(f"fraction {test_fraction} of {n} rows leaves an empty part")
    stratify = ds.target if ds.task.is_classification else None
    try:
        train_idx, test_idx = _sk_split(
            np.arange(n), test_size=n_test, random_state=_seed32(seed), stratify=stratify
        )
    except ValueError as exc:
        raise DegenerateSplit(str(exc)) from None
    return ds.rows(np.sort(train_idx)), ds.rows(np.sort(test_idx))


def standardize(ds: Dataset) -> Dataset:
    """Z-score every feature column (sample variance, ddof=1).

    Constant columns are left as they are and reported in ``degenerate_columns``.
    """
    x = ds.features
    if ds.n_samples < 2:
        return replace(ds, standardized=True, degenerate_columns=tuple(range(ds.n_features)))
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    bad = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    safe_std = np.where(bad, 1.0, std)
    z = np.where(bad, x, (x - mean) / safe_std)
    return replace(
        ds,
        features=z,
        standardized=True,
        degenerate_columns=tuple(int(i) for i in np.flatnonzero(bad)),
    )


def zscore(v: np.ndarray) -> np.ndarray:
    """Column-wise z-score of a 1-D or 2-D array; constant columns pass through."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] < 2:
        return v.copy()
    mean = v.mean(axis=0)
    std = v.std(axis=0, ddof=1)
    bad = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    return np.where(bad, v, (v - mean) / np.where(bad, 1.0, std))
