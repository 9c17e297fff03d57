"""SGD/Adam and the mini-batch training loop."""

from __future__ import annotations

import math

import numpy as np

from .data import Dataset, DataValidationError
from .models import ModelSpec, loss_and_grad
from .numerics import Rng, ShapeError

DEFAULT_LR = {"sgd": 0.01, "adam": 0.001}


class NumericError(FloatingPointError):
    pass


class Optimizer:
    kind = ""

    def __init__(self, learning_rate: float):
        if not learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        self.learning_rate = float(learning_rate)

    def _check(self, params, grad):
        if params.shape != grad.shape:
            raise ShapeError(f"params {params.shape} vs grad {grad.shape}")
        bad = np.flatnonzero(~np.isfinite(grad))
        if bad.size:
            raise NumericError(f"non-finite gradient at index {int(bad[0])}")

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SGD(Optimizer):
    kind = "sgd"

    def step(self, params, grad):
        self._check(params, grad)
        return params - self.learning_rate * grad


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, learning_rate: float, beta1=0.9, beta2=0.999, epsilon=1e-8):
        super().__init__(learning_rate)
        self.beta1, self.beta2, self.epsilon = beta1, beta2, epsilon
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grad):
        self._check(params, grad)
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        elif self.m.shape != params.shape:
            raise ShapeError(f"optimizer state has {self.m.size} entries, params {params.size}")
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def make_optimizer(kind: str, learning_rate: float | None = None) -> Optimizer:
    if kind not in DEFAULT_LR:
        raise ValueError(f"unknown optimizer {kind!r}")
    lr = DEFAULT_LR[kind] if learning_rate is None else learning_rate
    if kind == "sgd":
        return SGD(lr)
    return Adam(lr)


def n_batches(n_samples: int, batch_size: int) -> int:
    return math.ceil(n_samples / batch_size)


def train_epochs(spec: ModelSpec, params: np.ndarray, opt: Optimizer, data: Dataset,
                 epochs: int, batch_size: int, l2: float, rng: Rng):
    """Shuffled mini-batch training; returns ``(params, mean loss per epoch)``."""
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    if data.n_samples == 0:
        raise DataValidationError("cannot train on an empty dataset")
    params = np.array(params, dtype=np.float64)
    history = []
    n = data.n_samples
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grad = loss_and_grad(spec, params, data.features[idx], data.labels[idx],
                                       l2, rng)
            params = opt.step(params, grad)
            total += loss * idx.size
        history.append(total / n)
    return params, history
