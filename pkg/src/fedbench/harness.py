"""Baselines, repeated experiments and grid sweeps."""

from __future__ import annotations

import itertools
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import transport as tp
from .config import STANDARD_CLIENTS, STANDARD_ROUNDS, STANDARD_SIGMAS, SWEEP_AXES, ExperimentConfig
from .data import Dataset, DataValidationError, SplitSpec, kfold, load_csv, split, standardize, \
    synthesize_blobs
from .federation import (ClientShard, FederatedClient, FederationAborted, NoiseSpec,
                         TrainConfig, aggregate, make_schedule, pooled_test, run_federated)
from .meter import Stopwatch, predict_traffic
from .metrics import EvalReport, delta_accuracy_loss, evaluate
from .models import ModelSpec, init_params, parameter_count, predict_proba
from .numerics import Rng, derive_seed
from .optim import make_optimizer, train_epochs
from .partition import partition_iid, partition_imbalanced
from .report import MetricsRecord

log = logging.getLogger(__name__)


def default_imbalance_grid(n_classes: int) -> tuple[float, ...]:
    return (1.0 / n_classes, 0.4, 0.6, 0.8, 0.9, 1.0)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.is_synthetic:
        return synthesize_blobs(cfg.n_samples, cfg.n_features, cfg.n_classes, cfg.separation,
                                cfg.data_seed)
    col = cfg.label_column
    label = int(col) if col.lstrip("-").isdigit() else col
    ds, _ = load_csv(cfg.source, label, cfg.has_header)
    return ds.validate()


@lru_cache(maxsize=8)
def _cached_dataset(cfg_key: ExperimentConfig) -> Dataset:
    return load_dataset(cfg_key)


def _data_key(cfg: ExperimentConfig) -> ExperimentConfig:
    # only data fields matter for the cache
    return ExperimentConfig(source=cfg.source, label_column=cfg.label_column,
                            has_header=cfg.has_header, n_samples=cfg.n_samples,
                            n_features=cfg.n_features, n_classes=cfg.n_classes,
                            separation=cfg.separation, data_seed=cfg.data_seed)


def dataset_for(cfg: ExperimentConfig) -> Dataset:
    return _cached_dataset(_data_key(cfg))


def model_spec(cfg: ExperimentConfig, ds: Dataset) -> ModelSpec:
    return ModelSpec(cfg.model, ds.n_features, ds.n_classes)


def train_config(cfg: ExperimentConfig, ds: Dataset) -> TrainConfig:
    return TrainConfig(model_spec(cfg, ds), cfg.optimizer, cfg.lr, cfg.l2, cfg.batch_size)


def make_shards(cfg: ExperimentConfig, ds: Dataset, seed: int) -> list[ClientShard]:
    """Partition, split each client 80:20, and standardize on the pooled training splits."""
    if cfg.imbalance_level is None:
        plan = partition_iid(ds, cfg.n_clients, derive_seed(seed, "partition"))
    else:
        if cfg.n_clients != ds.n_classes:
            raise DataValidationError(
                f"imbalance requires n_clients == n_classes ({ds.n_classes})")
        plan = partition_imbalanced(ds, cfg.imbalance_level, derive_seed(seed, "partition"))
    pairs = []
    for cid, shard in enumerate(plan.shards(ds)):
        spec = SplitSpec(cfg.train_fraction, True, derive_seed(seed, f"client/{cid}/split"))
        tr, te = split(shard, spec)
        if tr.n_samples == 0:
            raise DataValidationError(f"client {cid} has no training samples")
        pairs.append((tr, te))
    if cfg.standardize:
        pooled = Dataset(np.concatenate([tr.features for tr, _ in pairs]),
                         np.concatenate([tr.labels for tr, _ in pairs]), ds.n_classes)
        _, _, scaler = standardize(pooled)
        pairs = [(scaler.transform(tr), scaler.transform(te)) for tr, te in pairs]
    return [ClientShard(cid, tr, te) for cid, (tr, te) in enumerate(pairs)]


def centralized_fit(cfg: ExperimentConfig, train: Dataset, seed: int):
    """Centralized reference training with the same init/stream labels as client 0, round 0."""
    tc = train_config(cfg, train)
    params = init_params(tc.spec, Rng(seed).child("init"))
    opt = make_optimizer(cfg.optimizer, cfg.lr)
    rng = Rng(seed).child("client/0/round/0").child("train")
    return train_epochs(tc.spec, params, opt, train, cfg.total_epochs, cfg.batch_size, cfg.l2, rng)


def run_baseline(cfg: ExperimentConfig) -> EvalReport:
    """Centralized k-fold cross-validation; the mean fold AUC is the reference quality."""
    return _baseline(_baseline_key(cfg))


def _baseline_key(cfg: ExperimentConfig) -> ExperimentConfig:
    return cfg.replace(n_clients=1, n_rounds=1, noise_sigma=0.0, imbalance_level=None,
                       transport="inproc", repeats=1)


@lru_cache(maxsize=64)
def _baseline(cfg: ExperimentConfig) -> EvalReport:
    ds = dataset_for(cfg)
    reports = []
    for fold, (tr, va) in enumerate(kfold(ds, cfg.cv_folds, derive_seed(cfg.seed, "kfold"))):
        if cfg.standardize:
            tr, (va,), _ = standardize(tr, [va])
        params, _ = centralized_fit(cfg, tr, derive_seed(cfg.seed, f"fold/{fold}"))
        spec = model_spec(cfg, ds)
        reports.append(evaluate(predict_proba(spec, params, va.features), va.labels))
    return EvalReport(float(np.mean([r.auc for r in reports])),
                      int(sum(r.n_samples for r in reports)),
                      float(np.mean([r.accuracy for r in reports])))


def repeat_seed(cfg: ExperimentConfig, repeat: int) -> int:
    return derive_seed(cfg.seed, f"repeat/{repeat}")


def run_once(cfg: ExperimentConfig, repeat: int = 0):
    """One seeded federated run; returns ``FederatedResult``."""
    ds = dataset_for(cfg)
    seed = repeat_seed(cfg, repeat)
    shards = make_shards(cfg, ds, seed)
    schedule = make_schedule(cfg.total_epochs, cfg.n_rounds)
    return run_federated(shards, train_config(cfg, ds), schedule, NoiseSpec(cfg.noise_sigma),
                         seed, cfg.transport)


def check_feasible(cfg: ExperimentConfig) -> None:
    """Raise ``DataValidationError``/``ValueError`` if the cell cannot run at all."""
    ds = dataset_for(cfg)
    make_schedule(cfg.total_epochs, cfg.n_rounds)
    make_shards(cfg, ds, repeat_seed(cfg, 0))


def run_experiment(cfg: ExperimentConfig) -> list[MetricsRecord]:
    """``cfg.repeats`` seeded runs plus one summary record (mean/std AUC)."""
    try:
        check_feasible(cfg)
        central = run_baseline(cfg)
    except (DataValidationError, ValueError) as exc:
        return [MetricsRecord.from_config(cfg, row_type="skipped", reason=str(exc))]
    ds = dataset_for(cfg)
    p = parameter_count(model_spec(cfg, ds))
    records = []
    for k in range(cfg.repeats):
        try:
            res = run_once(cfg, k)
        except (FederationAborted, RuntimeError, tp.TransportError, tp.ProtocolError) as exc:
            log.warning("repeat %d failed: %s", k, exc)
            records.append(MetricsRecord.from_config(cfg, row_type="failed", repeat=k,
                                                     reason=str(exc)))
            continue
        res_rec = res.resources
        records.append(MetricsRecord.from_config(
            cfg, row_type="run", repeat=k,
            auc=res.report.auc, accuracy=res.report.accuracy, central_auc=central.auc,
            delta_accuracy_loss=delta_accuracy_loss(res.report, central),
            client_auc=res.rounds[-1].client_auc,
            auc_trace=tuple(r.auc for r in res.rounds),
            param_count=p,
            traffic_bytes_total=res_rec.traffic_bytes_total,
            traffic_bytes_per_client=res_rec.traffic_bytes_per_client,
            predicted_traffic_bytes=predict_traffic(p, cfg.n_clients, cfg.n_rounds),
            memory_client_bytes=res_rec.memory.client_bytes,
            memory_aggregator_bytes=res_rec.memory.aggregator_bytes,
            client_train_seconds=float(np.mean(res_rec.client_train_seconds)),
            client_train_seconds_max=float(np.max(res_rec.client_train_seconds)),
            global_wall_seconds=res_rec.global_wall_seconds,
        ))
    aucs = [r.auc for r in records if r.row_type == "run"]
    summary = MetricsRecord.from_config(cfg, row_type="summary", central_auc=central.auc)
    if aucs:
        mean = statistics.fmean(aucs)
        summary = summary.replace(
            auc=mean, auc_std=statistics.stdev(aucs) if len(aucs) > 1 else 0.0,
            delta_accuracy_loss=abs(mean - central.auc), n_ok=len(aucs))
    return records + [summary]


@dataclass
class SweepResult:
    records: list[MetricsRecord]
    cells: list[dict]
    marginals: dict[str, dict] = field(default_factory=dict)

    @property
    def all_succeeded(self) -> bool:
        return all(r.row_type in ("run", "summary") for r in self.records)


def expand_axes(base: ExperimentConfig, axes: dict) -> list[dict]:
    """Cartesian product of the supplied axes, in ``SWEEP_AXES`` order."""
    names = [a for a in SWEEP_AXES if a in axes]
    if not names:
        raise ValueError("sweep needs at least one axis")
    values = []
    for a in names:
        v = axes[a]
        if v == "default":
            if a != "imbalance_level":
                raise ValueError(f"no default grid for {a}")
            v = default_imbalance_grid(dataset_for(base).n_classes)
        if not v:
            raise ValueError(f"axis {a} is empty")
        values.append(tuple(v))
    return [dict(zip(names, combo)) for combo in itertools.product(*values)]


STANDARD_AXES = {"n_clients": STANDARD_CLIENTS, "n_rounds": STANDARD_ROUNDS}
STANDARD_NOISE_AXES = {"noise_sigma": STANDARD_SIGMAS}


def _run_cell(cfg):
    return run_experiment(cfg)


def run_sweep(base: ExperimentConfig, axes: dict, parallel: int = 0) -> SweepResult:
    """Run every cell of the grid and compute per-axis marginal AUC means.

    A marginal for value ``v`` of axis ``a`` averages the cell-mean AUC
    over all cells with ``a == v``. Cells run sequentially unless
    ``parallel`` > 0 (wall times then stop being comparable).
    """
    cells = expand_axes(base, axes)
    configs = [base.replace(**cell) for cell in cells]
    if parallel > 0:
        with ProcessPoolExecutor(parallel) as ex:
            per_cell = list(ex.map(_run_cell, configs))
    else:
        per_cell = [run_experiment(c) for c in configs]
    records = [r for recs in per_cell for r in recs]
    cell_auc = {}
    for cell, recs in zip(cells, per_cell):
        summ = [r for r in recs if r.row_type == "summary" and r.auc is not None]
        if summ:
            cell_auc[tuple(cell.items())] = summ[0].auc
    marginals = {}
    for a in cells[0]:
        groups: dict = {}
        for key, auc in cell_auc.items():
            groups.setdefault(dict(key)[a], []).append(auc)
        marginals[a] = {v: statistics.fmean(g) for v, g in groups.items()}
    return SweepResult(records, cells, marginals)


# --- multi-process TCP runs ------------------------------------------------


def serve(cfg: ExperimentConfig, host: str, port: int, repeat: int = 0, ready=None):
    """Aggregator endpoint for clients started with :func:`join`.

    Returns ``(params, round_records)``. ``ready`` is called with the bound
    port once the listener is up.
    """
    ds = dataset_for(cfg)
    seed = repeat_seed(cfg, repeat)
    shards = make_shards(cfg, ds, seed)
    schedule = make_schedule(cfg.total_epochs, cfg.n_rounds)
    listener = tp.TCPListener(host, port)
    if ready is not None:
        ready(listener.port)
    try:
        endpoint = tp.AggregatorEndpoint(listener.accept(cfg.n_clients, timeout=600))
        try:
            with Stopwatch() as sw:
                params, records = aggregate(endpoint, train_config(cfg, ds), schedule,
                                            pooled_test(shards), seed)
            log.info("served %d rounds in %.2fs, %d bytes", len(records), sw.elapsed,
                     sum(endpoint.bytes_by_client().values()))
        finally:
            endpoint.close()
    finally:
        listener.close()
    return params, records


def join(cfg: ExperimentConfig, client_id: int, host: str, port: int, repeat: int = 0) -> int:
    """Run client ``client_id`` of the config against a remote aggregator."""
    ds = dataset_for(cfg)
    seed = repeat_seed(cfg, repeat)
    shards = make_shards(cfg, ds, seed)
    if not 0 <= client_id < len(shards):
        raise ValueError(f"client id must be in [0, {len(shards)})")
    client = FederatedClient(shards[client_id], train_config(cfg, ds),
                             make_schedule(cfg.total_epochs, cfg.n_rounds),
                             NoiseSpec(cfg.noise_sigma), seed)
    ch = tp.connect(host, port)
    try:
        return tp.client_loop(ch, client.session())
    finally:
        ch.close()
