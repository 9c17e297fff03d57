"""Synchronous FedAvg: round schedule, client rounds, aggregation and the run loop."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

import numpy as np

from . import transport as tp
from .data import Dataset
from .meter import ResourceRecord, Stopwatch, estimate_memory, predict_traffic
from .metrics import EvalReport, aggregate_client_metrics, evaluate
from .models import ModelSpec, init_params, parameter_count, predict_proba
from .numerics import Rng, ShapeError, gaussian
from .optim import make_optimizer, train_epochs

log = logging.getLogger(__name__)

SERVER_LR = 1.0


class ProtocolError(RuntimeError):
    pass


class FederationAborted(RuntimeError):
    """Raised when a run stops early; ``records`` holds the completed rounds."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class RoundSchedule:
    total_epochs: int
    epochs_per_round: tuple[int, ...]

    @property
    def n_rounds(self) -> int:
        return len(self.epochs_per_round)


def make_schedule(total_epochs: int, n_rounds: int) -> RoundSchedule:
    """Spread a fixed epoch budget over rounds; earlier rounds take the remainder."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    if total_epochs < n_rounds:
        raise ValueError(f"total_epochs={total_epochs} is less than n_rounds={n_rounds}")
    base, extra = divmod(total_epochs, n_rounds)
    return RoundSchedule(total_epochs, tuple(base + (r < extra) for r in range(n_rounds)))


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise sigma must be non-negative")


@dataclass
class ClientUpdate:
    client_id: int
    round: int
    params: np.ndarray
    n_samples: int
    local_report: EvalReport | None = None
    train_seconds: float = 0.0
    bytes_would_send: int = 0


@dataclass
class AggregatorState:
    global_params: np.ndarray
    expected_clients: frozenset[int]
    round: int = 0
    received: set[int] = field(default_factory=set)
    server_lr: float = SERVER_LR


def fedavg(updates: list[ClientUpdate], state: AggregatorState) -> np.ndarray:
    """Sample-weighted mean of client parameters, applied with the server learning rate.

    Updates are combined in client-id order so the result does not depend
    on arrival order.
    """
    ids = [u.client_id for u in updates]
    if set(ids) != set(state.expected_clients) or len(ids) != len(set(ids)):
        missing = sorted(set(state.expected_clients) - set(ids))
        raise ProtocolError(f"round {state.round} incomplete: missing clients {missing}")
    p = state.global_params.size
    for u in updates:
        if u.round != state.round:
            raise ProtocolError(f"client {u.client_id} sent round {u.round}, expected {state.round}")
        if u.params.shape != (p,):
            raise ShapeError(f"client {u.client_id} sent {u.params.size} params, expected {p}")
    total = sum(u.n_samples for u in updates)
    if total <= 0:
        raise ValueError("total sample count must be positive")
    mean = np.zeros(p)
    for u in sorted(updates, key=lambda u: u.client_id):
        mean += (u.n_samples / total) * u.params
    state.received = set(ids)
    if state.server_lr == 1.0:
        return mean
    return state.global_params + state.server_lr * (mean - state.global_params)


def client_rng(seed: int, client_id: int, rnd: int) -> Rng:
    """Stream for one client in one round; children ``train`` and ``noise``."""
    return Rng(seed).child(f"client/{client_id}/round/{rnd}")


@dataclass(frozen=True)
class TrainConfig:
    spec: ModelSpec
    optimizer: str = "sgd"
    learning_rate: float | None = None
    l2: float = 0.0
    batch_size: int = 512


def client_round(train: Dataset, global_params: np.ndarray, epochs: int, cfg: TrainConfig,
                 noise: NoiseSpec, rng: Rng, client_id: int = 0, rnd: int = 0,
                 test: Dataset | None = None) -> ClientUpdate:
    """Train locally from the global model, then perturb with N(0, sigma^2) noise."""
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)  # fresh state every round
    with Stopwatch() as sw:
        try:
            params, _ = train_epochs(cfg.spec, global_params, opt, train, epochs,
                                     cfg.batch_size, cfg.l2, rng.child("train"))
        except Exception as exc:
            raise RuntimeError(f"client {client_id}: local training failed: {exc}") from exc
    if noise.sigma > 0:
        params = params + gaussian(rng.child("noise"), params.size, 0.0, noise.sigma)
    report = None
    if test is not None and test.n_samples and np.unique(test.labels).size >= 2:
        report = evaluate(predict_proba(cfg.spec, params, test.features), test.labels)
    return ClientUpdate(client_id, rnd, params, train.n_samples, report, sw.elapsed,
                        tp.frame_size(params.size))


@dataclass(frozen=True)
class ClientShard:
    client_id: int
    train: Dataset
    test: Dataset


@dataclass
class RoundRecord:
    round: int
    auc: float
    accuracy: float
    client_auc: float | None
    client_train_seconds: list[float]


@dataclass
class FederatedResult:
    params: np.ndarray
    rounds: list[RoundRecord]
    resources: ResourceRecord
    report: EvalReport


class FederatedClient:
    """One simulated institution: owns its shard and per-round timings."""

    def __init__(self, shard: ClientShard, cfg: TrainConfig, schedule: RoundSchedule,
                 noise: NoiseSpec, seed: int):
        self.shard = shard
        self.cfg = cfg
        self.schedule = schedule
        self.noise = noise
        self.seed = seed
        self.updates: dict[int, ClientUpdate] = {}

    def train_fn(self, rnd, global_params):
        cid = self.shard.client_id
        upd = client_round(self.shard.train, global_params, self.schedule.epochs_per_round[rnd],
                           self.cfg, self.noise, client_rng(self.seed, cid, rnd), cid, rnd,
                           self.shard.test)
        self.updates[rnd] = upd
        return upd.params, upd.n_samples

    def session(self) -> tp.ClientSession:
        return tp.ClientSession(self.shard.client_id, self.shard.train.n_samples, self.train_fn)


def pooled_test(shards: list[ClientShard]) -> Dataset:
    tests = [s.test for s in shards]
    return Dataset(np.concatenate([t.features for t in tests]),
                   np.concatenate([t.labels for t in tests]),
                   tests[0].n_classes, tests[0].class_names)


def aggregate(endpoint: tp.AggregatorEndpoint, cfg: TrainConfig, schedule: RoundSchedule,
              test: Dataset, seed: int, on_round=None) -> tuple[np.ndarray, list[RoundRecord]]:
    """Aggregator side of a run: register, then broadcast/gather/average each round."""
    ids = endpoint.register()
    state = AggregatorState(init_params(cfg.spec, Rng(seed).child("init")), frozenset(ids))
    records: list[RoundRecord] = []
    try:
        for rnd in range(schedule.n_rounds):
            state.round = rnd
            endpoint.broadcast(rnd, state.global_params)
            msgs = endpoint.gather(rnd)
            updates = [ClientUpdate(cid, m.round, m.params, m.n_samples) for cid, m in msgs.items()]
            state.global_params = fedavg(updates, state)
            rep = evaluate(predict_proba(cfg.spec, state.global_params, test.features), test.labels)
            rec = RoundRecord(rnd, rep.auc, rep.accuracy, None, [])
            if on_round is not None:
                on_round(rec)
            records.append(rec)
            log.debug("round %d auc=%.4f", rnd, rep.auc)
    except (tp.TransportError, tp.ProtocolError, ProtocolError) as exc:
        raise FederationAborted(f"aborted in round {state.round}: {exc}", records) from exc
    finally:
        endpoint.shutdown()
    return state.global_params, records


def run_federated(shards: list[ClientShard], cfg: TrainConfig, schedule: RoundSchedule,
                  noise: NoiseSpec, seed: int, transport: str = "inproc") -> FederatedResult:
    """Run one federated training job.

    ``transport`` is ``"inproc"`` or ``"tcp"`` / ``"tcp:host:port"``; over
    TCP every client runs in its own thread talking to a localhost listener.
    """
    clients = [FederatedClient(s, cfg, schedule, noise, seed) for s in shards]
    test = pooled_test(shards)
    errors: list[BaseException] = []

    with Stopwatch() as wall:
        if transport == "inproc":
            endpoint = tp.inproc_endpoint([c.session() for c in clients])
            try:
                params, records = aggregate(endpoint, cfg, schedule, test, seed)
            finally:
                endpoint.close()
        elif transport.startswith("tcp"):
            _, _, hostport = transport.partition(":")
            host, _, port = hostport.rpartition(":") if hostport else ("", "", "0")
            listener = tp.TCPListener(host or "127.0.0.1", int(port or 0))

            def work(client):
                try:
                    ch = tp.connect(listener.host, listener.port)
                    try:
                        tp.client_loop(ch, client.session())
                    finally:
                        ch.close()
                except BaseException as exc:  # surfaced after join
                    errors.append(exc)

            threads = [threading.Thread(target=work, args=(c,), daemon=True) for c in clients]
            for t in threads:
                t.start()
            try:
                endpoint = tp.AggregatorEndpoint(listener.accept(len(clients)))
                try:
                    params, records = aggregate(endpoint, cfg, schedule, test, seed)
                finally:
                    endpoint.close()
            finally:
                listener.close()
                for t in threads:
                    t.join(timeout=30)
        else:
            raise ValueError(f"unknown transport {transport!r}")
    if errors:
        raise FederationAborted(f"client failure: {errors[0]}", records)

    by_client = endpoint.bytes_by_client()
    for rec in records:
        ups = [c.updates[rec.round] for c in clients]
        rec.client_train_seconds = [u.train_seconds for u in ups]
        reports = [u.local_report for u in ups if u.local_report is not None]
        rec.client_auc = aggregate_client_metrics(reports).auc if reports else None

    p = parameter_count(cfg.spec)
    resources = ResourceRecord(
        client_train_seconds=[sum(c.updates[r].train_seconds for r in c.updates) for c in clients],
        global_wall_seconds=wall.elapsed,
        client_traffic_bytes=[by_client[c.shard.client_id] for c in clients],
        memory=estimate_memory(cfg.spec, cfg.optimizer, cfg.batch_size, len(clients)),
    )
    expected = predict_traffic(p, len(clients), schedule.n_rounds)
    if resources.traffic_bytes_total != expected:
        raise RuntimeError(f"traffic accounting mismatch: measured "
                           f"{resources.traffic_bytes_total}, predicted {expected}")
    final = evaluate(predict_proba(cfg.spec, params, test.features), test.labels)
    return FederatedResult(params, records, resources, final)
