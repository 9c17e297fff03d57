"""Logistic regression and the sequential ReLU network, on flat parameter vectors.

Parameter layout: for each dense layer in order, the ``fan_in x fan_out``
weight matrix (row-major) followed by its ``fan_out`` biases. The output
layer is a softmax over ``n_classes`` units for both model kinds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import Rng, ShapeError

LOGISTIC_REGRESSION = "logistic_regression"
SEQUENTIAL_DL = "sequential_dl"
DL_HIDDEN = (256, 512, 128, 64, 32)
# hidden layer index -> dropout rate
DL_DROPOUT = ((0, 0.4), (1, 0.15))


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    input_dim: int
    n_classes: int
    hidden: tuple[int, ...] = field(default=None)
    dropout: tuple[tuple[int, float], ...] = field(default=None)

    def __post_init__(self):
        if self.kind not in (LOGISTIC_REGRESSION, SEQUENTIAL_DL):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.input_dim <= 0:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if self.n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        if self.kind == LOGISTIC_REGRESSION:
            if self.hidden:
                raise ValueError("logistic regression has no hidden layers")
            object.__setattr__(self, "hidden", ())
            object.__setattr__(self, "dropout", ())
        else:
            if self.hidden is not None and tuple(self.hidden) != DL_HIDDEN:
                raise ValueError(f"sequential_dl hidden widths are fixed to {DL_HIDDEN}")
            object.__setattr__(self, "hidden", DL_HIDDEN)
            if self.dropout is None:
                object.__setattr__(self, "dropout", DL_DROPOUT)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.n_classes)

    def layer_shapes(self) -> list[tuple[int, int]]:
        w = self.widths
        return list(zip(w[:-1], w[1:]))


def parameter_count(spec: ModelSpec) -> int:
    return sum(i * o + o for i, o in spec.layer_shapes())


def unflatten(spec: ModelSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into ``(W, b)`` views (no copy)."""
    params = np.asarray(params)
    if params.shape != (parameter_count(spec),):
        raise ShapeError(f"expected {parameter_count(spec)} parameters, got shape {params.shape}")
    layers = []
    off = 0
    for i, o in spec.layer_shapes():
        w = params[off:off + i * o].reshape(i, o)
        off += i * o
        b = params[off:off + o]
        off += o
        layers.append((w, b))
    return layers


def flatten(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in layers])


def weight_mask(spec: ModelSpec) -> np.ndarray:
    """Boolean mask selecting weights (not biases) in the flat layout."""
    mask = np.zeros(parameter_count(spec), dtype=bool)
    for w, _ in unflatten(spec, mask):
        w[...] = True
    return mask


def init_params(spec: ModelSpec, rng: Rng) -> np.ndarray:
    """Glorot-uniform weights, zero biases."""
    params = np.zeros(parameter_count(spec))
    for w, _ in unflatten(spec, params):
        fan_in, fan_out = w.shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-limit, limit, w.shape)
    return params


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def forward(spec: ModelSpec, params, features, rng: Rng | None = None):
    """Run the network. ``rng`` given means train mode (inverted dropout).

    Returns ``(probabilities, cache)``; the cache feeds :func:`loss_and_grad`.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(f"features of shape {x.shape} do not match input_dim {spec.input_dim}")
    layers = unflatten(spec, params)
    drop = dict(spec.dropout)
    acts = [x]
    masks = []
    h = x
    for li, (w, b) in enumerate(layers[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        mask = None
        p = drop.get(li, 0.0)
        if rng is not None and p > 0:
            mask = (rng.random(h.shape) >= p) / (1.0 - p)
            h = h * mask
        masks.append(mask)
        acts.append(h)
    w, b = layers[-1]
    logits = h @ w + b
    return _softmax(logits), {"acts": acts, "masks": masks, "logits": logits, "layers": layers}


def predict_proba(spec: ModelSpec, params, features) -> np.ndarray:
    return forward(spec, params, features)[0]


def loss_and_grad(spec: ModelSpec, params, features, labels, l2: float = 0.0,
                  rng: Rng | None = None) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||weights||^2`` and its exact gradient."""
    y = np.asarray(labels, dtype=np.int64)
    probs, cache = forward(spec, params, features, rng)
    n = y.size
    if probs.shape[0] != n:
        raise ShapeError(f"{probs.shape[0]} samples but {n} labels")
    rows = np.arange(n)
    logp = _log_softmax(cache["logits"])
    loss = -logp[rows, y].mean()

    layers = cache["layers"]
    acts = cache["acts"]
    grad = np.zeros(parameter_count(spec))
    glayers = unflatten(spec, grad)

    delta = probs.copy()
    delta[rows, y] -= 1.0
    delta /= n
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        gw, gb = glayers[li]
        gw[...] = acts[li].T @ delta
        gb[...] = delta.sum(axis=0)
        if li == 0:
            break
        delta = delta @ w.T
        mask = cache["masks"][li - 1]
        if mask is not None:
            delta *= mask
        delta *= acts[li] > 0

    if l2:
        wsq = 0.0
        for (w, _), (gw, _) in zip(layers, glayers):
            wsq += np.sum(w * w)
            gw += l2 * w
        loss += 0.5 * l2 * wsq
    return float(loss), grad
