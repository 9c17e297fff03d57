"""Datasets: CSV ingestion, synthetic blobs, standardization and splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import Rng


class DataValidationError(ValueError):
    pass


class CSVParseError(DataValidationError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus integer labels in ``[0, n_classes)``.

    Subsets (client shards, folds) keep the parent's ``n_classes`` and may
    lack some classes; :meth:`validate` checks the full-dataset invariant.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        x = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise DataValidationError(f"features must be 2-D, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise DataValidationError(
                f"{y.shape[0] if y.ndim else 0} labels for {x.shape[0]} samples"
            )
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise DataValidationError("label outside [0, n_classes)")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.n_classes, self.class_names)

    def validate(self) -> "Dataset":
        if self.n_samples == 0:
            raise DataValidationError("no samples")
        missing = np.flatnonzero(self.class_counts() == 0)
        if missing.size:
            raise DataValidationError(f"classes without samples: {missing.tolist()}")
        if self.n_classes < 2:
            raise DataValidationError("need at least two classes")
        return self


def load_csv(path, label_column=-1, has_header=True) -> tuple[Dataset, dict[str, int]]:
    """Read a numeric CSV with one label column.

    ``label_column`` is a column index (negative counts from the end) or,
    when the file has a header, a column name. Class tokens are mapped to
    indices in order of first appearance; the mapping is returned too.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = None
    first_line = 1
    if has_header and rows:
        header = rows[0]
        rows = rows[1:]
        first_line = 2
    rows_with_lines = [(i + first_line, r) for i, r in enumerate(rows) if r]
    if not rows_with_lines:
        raise DataValidationError(f"{path}: no samples")

    width = len(header) if header is not None else len(rows_with_lines[0][1])
    if isinstance(label_column, str):
        if header is None:
            raise DataValidationError("label column given by name but file has no header")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataValidationError(f"no column named {label_column!r}") from None
    else:
        label_idx = int(label_column) % width

    mapping: dict[str, int] = {}
    labels = []
    features = []
    for line_no, row in rows_with_lines:
        if len(row) != width:
            raise CSVParseError(f"{path}:{line_no}: expected {width} columns, got {len(row)}")
        token = row[label_idx].strip()
        labels.append(mapping.setdefault(token, len(mapping)))
        values = []
        for col, cell in enumerate(row):
            if col == label_idx:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise CSVParseError(
                    f"{path}: non-numeric feature {cell!r} at line {line_no}, column {col + 1}"
                ) from None
        features.append(values)

    if len(mapping) < 2:
        raise DataValidationError(f"{path}: only one class present")
    names = tuple(sorted(mapping, key=mapping.get))
    ds = Dataset(np.array(features, dtype=np.float64).reshape(len(labels), width - 1),
                 np.array(labels), len(mapping), names)
    return ds, mapping


def synthesize_blobs(n_samples, n_features, n_classes, separation, seed) -> Dataset:
    """Balanced isotropic Gaussian blobs.

    Class ``c`` is centred at ``separation`` along axis ``c % n_features``
    with unit variance; leftover samples go to the lowest class indices.
    """
    if n_features <= 0:
        raise ValueError("n_features must be positive")
    if n_classes < 2 or n_samples < n_classes:
        raise ValueError("need n_classes >= 2 and n_samples >= n_classes")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    base, extra = divmod(n_samples, n_classes)
    counts = [base + (c < extra) for c in range(n_classes)]
    labels = np.repeat(np.arange(n_classes), counts)
    rng = Rng(seed)
    x = rng.standard_normal((n_samples, n_features))
    x[np.arange(n_samples), labels % n_features] += separation
    order = rng.permutation(n_samples)
    return Dataset(x[order], labels[order], n_classes)


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, ds: Dataset) -> Dataset:
        x = (ds.features - self.mean) / self.scale
        x[:, self.scale == np.inf] = 0.0
        return Dataset(x, ds.labels, ds.n_classes, ds.class_names)

    def to_text(self) -> str:
        fmt = lambda a: ",".join(repr(float(v)) for v in a)  # noqa: E731
        return f"n_features={self.mean.size}\nmean={fmt(self.mean)}\nscale={fmt(self.scale)}\n"

    @classmethod
    def from_text(cls, text: str) -> "ScalerParams":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        parse = lambda s: np.array([float(v) for v in s.split(",")] if s else [])  # noqa: E731
        return cls(parse(kv["mean"]), parse(kv["scale"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ScalerParams":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def standardize(train: Dataset, others=()) -> tuple[Dataset, list[Dataset], ScalerParams]:
    """Fit per-feature mean/std on ``train`` and apply it everywhere.

    Zero-variance features map to 0 (stored as an infinite scale).
    """
    if train.n_samples == 0:
        raise DataValidationError("cannot standardize an empty training set")
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    scale = np.where(std > 0, std, np.inf)
    params = ScalerParams(mean, scale)
    return params.transform(train), [params.transform(o) for o in others], params


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_indices(ds: Dataset, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    rng = Rng(spec.seed)
    if not spec.stratified:
        order = rng.permutation(ds.n_samples)
        k = _round_half_up(spec.train_fraction * ds.n_samples)
        return np.sort(order[:k]), np.sort(order[k:])
    train, test = [], []
    for c, count in enumerate(ds.class_counts()):
        if count == 0:
            continue
        if count == 1:
            raise DataValidationError(f"class {c} has a single sample; cannot stratify")
        idx = np.flatnonzero(ds.labels == c)[rng.permutation(count)]
        k = _round_half_up(spec.train_fraction * count)
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    tr, te = split_indices(ds, spec)
    return ds.subset(tr), ds.subset(te)


def kfold_indices(ds: Dataset, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified folds; class members are dealt round-robin so earlier folds get the remainder."""
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > ds.n_samples:
        raise ValueError(f"k={k} exceeds n_samples={ds.n_samples}")
    rng = Rng(seed)
    dealt = []
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.labels == c)
        dealt.append(idx[rng.permutation(idx.size)])
    order = np.concatenate(dealt)
    fold_of = np.empty(ds.n_samples, dtype=np.int64)
    fold_of[order] = np.arange(order.size) % k
    folds = []
    for f in range(k):
        folds.append((np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)))
    return folds


def kfold(ds: Dataset, k: int, seed: int) -> list[tuple[Dataset, Dataset]]:
    return [(ds.subset(tr), ds.subset(va)) for tr, va in kfold_indices(ds, k, seed)]
