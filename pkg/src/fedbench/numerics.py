"""Dense float64 helpers and seeded random streams.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64.

Randomness comes from numpy's PCG64 bit generator. Child streams are split
off a parent seed by hashing ``(parent_seed, label)`` with BLAKE2b, so a
client's stream depends only on its label and never on the order in which
other streams were created. Gaussian draws use numpy's ziggurat sampler
(``Generator.standard_normal``).
"""

from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = (1 << 64) - 1


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


def as_matrix(data, cols: int | None = None) -> np.ndarray:
    """Return ``data`` as a finite, C-contiguous float64 matrix."""
    m = np.ascontiguousarray(data, dtype=np.float64)
    if m.ndim == 1 and cols is not None:
        m = m.reshape(-1, cols)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def derive_seed(seed: int, label: str) -> int:
    """Deterministically derive a 64-bit child seed from ``seed`` and ``label``."""
    h = hashlib.blake2b(digest_size=8)
    h.update((int(seed) & SEED_MASK).to_bytes(8, "little"))
    h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


class Rng:
    """Single-owner PCG64 stream with label-based splitting."""

    def __init__(self, seed: int):
        self.seed = int(seed) & SEED_MASK
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, label: str) -> "Rng":
        return Rng(derive_seed(self.seed, label))

    def uniform(self, low, high, size=None):
        return self.gen.uniform(low, high, size)

    def standard_normal(self, size=None):
        return self.gen.standard_normal(size)

    def permutation(self, n):
        return self.gen.permutation(n)

    def random(self, size=None):
        return self.gen.random(size)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"


def gaussian(rng: Rng, n: int, mean: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return np.full(n, float(mean))
    return mean + sigma * rng.standard_normal(n)
