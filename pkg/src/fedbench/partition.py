"""Distribute a dataset over simulated clients."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, DataValidationError
from .numerics import Rng


@dataclass(frozen=True)
class PartitionPlan:
    assignments: tuple[np.ndarray, ...]
    imbalance_level: float | str
    seed: int
    dropped: int = 0

    @property
    def n_clients(self) -> int:
        return len(self.assignments)

    def client_sizes(self) -> list[int]:
        return [a.size for a in self.assignments]

    def histograms(self, ds: Dataset) -> np.ndarray:
        """Per-client class counts, shape ``(n_clients, n_classes)``."""
        return np.stack([np.bincount(ds.labels[a], minlength=ds.n_classes)
                         for a in self.assignments])

    def shards(self, ds: Dataset) -> list[Dataset]:
        return [ds.subset(a) for a in self.assignments]

    def to_json(self) -> str:
        return json.dumps({
            "imbalance_level": self.imbalance_level,
            "seed": self.seed,
            "dropped": self.dropped,
            "clients": {str(i): sorted(int(v) for v in a)
                        for i, a in enumerate(self.assignments)},
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "PartitionPlan":
        obj = json.loads(text)
        clients = obj["clients"]
        return cls(tuple(np.array(clients[str(i)], dtype=np.int64) for i in range(len(clients))),
                   obj["imbalance_level"], obj["seed"], obj.get("dropped", 0))


def iid_counts(class_counts, n_clients: int) -> np.ndarray:
    """Closed-form per-client class histogram of :func:`partition_iid`.

    Each class is split as evenly as possible; the +1 remainders rotate
    across classes so that client sizes differ by at most one.
    """
    out = np.zeros((n_clients, len(class_counts)), dtype=np.int64)
    cursor = 0
    for c, count in enumerate(class_counts):
        base, extra = divmod(int(count), n_clients)
        out[:, c] = base
        for j in range(extra):
            out[(cursor + j) % n_clients, c] += 1
        cursor = (cursor + extra) % n_clients
    return out


def partition_iid(ds: Dataset, n_clients: int, seed: int) -> PartitionPlan:
    if n_clients < 1:
        raise ValueError("n_clients must be >= 1")
    counts = ds.class_counts()
    for c, cnt in enumerate(counts):
        if cnt < n_clients:
            raise DataValidationError(
                f"class {c} has {cnt} samples, fewer than {n_clients} clients")
    table = iid_counts(counts, n_clients)
    rng = Rng(seed)
    parts: list[list[np.ndarray]] = [[] for _ in range(n_clients)]
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.labels == c)
        idx = idx[rng.permutation(idx.size)]
        bounds = np.concatenate([[0], np.cumsum(table[:, c])])
        for i in range(n_clients):
            parts[i].append(idx[bounds[i]:bounds[i + 1]])
    return PartitionPlan(tuple(np.sort(np.concatenate(p)) for p in parts), "iid", seed)


def imbalanced_counts(n_samples: int, n_classes: int, level: float) -> np.ndarray:
    """Closed-form per-client class histogram of :func:`partition_imbalanced`.

    Client ``i`` takes ``round(level * size)`` samples of class ``i``; the
    rest is spread evenly over the other classes. The remainder goes to the
    classes following ``i`` cyclically (``i+1, i+2, ...``), which keeps the
    total demand on every class equal to ``size``.
    """
    size = n_samples // n_classes
    home = min(size, int(math.floor(level * size + 0.5)))
    base, extra = divmod(size - home, n_classes - 1)
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    for i in range(n_classes):
        others = [(i + k) % n_classes for k in range(1, n_classes)]
        out[i, i] = home
        for rank, c in enumerate(others):
            out[i, c] = base + (rank < extra)
    return out


def partition_imbalanced(ds: Dataset, level: float, seed: int) -> PartitionPlan:
    """One client per class; ``level`` is each client's home-class fraction.

    ``level == 1/C`` is the uniform split and ``level == 1`` yields
    single-class clients. Samples left over after carving equal-size
    clients are dropped (counted in ``plan.dropped``).
    """
    c = ds.n_classes
    if not (1.0 / c - 1e-12 <= level <= 1.0 + 1e-12):
        raise ValueError(f"level must lie in [1/{c}, 1], got {level}")
    table = imbalanced_counts(ds.n_samples, c, level)
    if table.sum(axis=1).min() == 0:
        raise DataValidationError("dataset too small for one non-empty client per class")
    available = ds.class_counts()
    demand = table.sum(axis=0)
    short = demand - available
    if (short > 0).any():
        msg = ", ".join(f"class {k}: need {demand[k]}, have {available[k]}"
                        for k in np.flatnonzero(short > 0))
        raise DataValidationError(f"not enough samples for level {level}: {msg}")
    rng = Rng(seed)
    parts: list[list[np.ndarray]] = [[] for _ in range(c)]
    for k in range(c):
        idx = np.flatnonzero(ds.labels == k)
        idx = idx[rng.permutation(idx.size)]
        bounds = np.concatenate([[0], np.cumsum(table[:, k])])
        for i in range(c):
            parts[i].append(idx[bounds[i]:bounds[i + 1]])
    assignments = tuple(np.sort(np.concatenate(p)) for p in parts)
    used = sum(a.size for a in assignments)
    return PartitionPlan(assignments, float(level), seed, dropped=ds.n_samples - used)
