"""Resource accounting: wall time, memory estimates and exact traffic bytes."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .models import ModelSpec, parameter_count
from .transport import HEADER_SIZE, frame_size

# register (client -> aggregator) + shutdown (aggregator -> client), both header-only
HANDSHAKE_BYTES_PER_CLIENT = 2 * HEADER_SIZE
OPTIMIZER_STATE_MULTIPLIER = {"sgd": 1, "adam": 3}


def round_traffic(param_count: int, n_clients: int, n_rounds: int) -> int:
    """Model exchange only: one download and one upload frame per client per round."""
    return n_rounds * n_clients * 2 * frame_size(param_count)


def predict_traffic(param_count: int, n_clients: int, n_rounds: int,
                    handshake: bool = True) -> int:
    total = round_traffic(param_count, n_clients, n_rounds)
    if handshake:
        total += n_clients * HANDSHAKE_BYTES_PER_CLIENT
    return total


@dataclass(frozen=True)
class MemoryEstimate:
    client_bytes: int
    aggregator_bytes: int
    param_term_bytes: int
    activation_term_bytes: int


def estimate_memory(spec: ModelSpec, optimizer: str, batch_size: int,
                    n_clients: int = 1) -> MemoryEstimate:
    """Deterministic float64 byte counts per role.

    client: parameters plus optimizer state, plus forward and backward
    buffers for the widest layer over one batch. aggregator: the global
    vector plus one in-flight vector per client.
    """
    p = parameter_count(spec)
    param_term = 8 * p * (1 + OPTIMIZER_STATE_MULTIPLIER[optimizer])
    act_term = 8 * max(spec.widths) * batch_size * 2
    return MemoryEstimate(param_term + act_term, 8 * p * (n_clients + 1), param_term, act_term)


class Stopwatch:
    """Monotonic timer usable as a context manager; re-entering accumulates."""

    def __init__(self):
        self.elapsed = 0.0
        self._start = None

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed += time.perf_counter() - self._start
        self._start = None
        return False


@dataclass
class ResourceRecord:
    client_train_seconds: list[float] = field(default_factory=list)
    global_wall_seconds: float = 0.0
    client_traffic_bytes: list[int] = field(default_factory=list)
    aggregator_extra_bytes: int = 0
    memory: MemoryEstimate | None = None

    @property
    def traffic_bytes_total(self) -> int:
        return sum(self.client_traffic_bytes) + self.aggregator_extra_bytes

    @property
    def traffic_bytes_per_client(self) -> int:
        return max(self.client_traffic_bytes, default=0)
