import numpy as np
import pytest

from fedbench.data import SplitSpec, split, synthesize_blobs
from fedbench.federation import (AggregatorState, ClientShard, ClientUpdate, NoiseSpec,
                                 ProtocolError, TrainConfig, client_rng, client_round, fedavg,
                                 make_schedule, run_federated)
from fedbench.models import ModelSpec, init_params
from fedbench.numerics import Rng, ShapeError
from fedbench.optim import make_optimizer, train_epochs

from .oracles import weighted_mean


@pytest.mark.parametrize("e,r,expected", [(100, 2, [50, 50]), (70, 1, [70]),
                                          (8, 5, [2, 2, 2, 1, 1])])
def test_schedule_examples(e, r, expected):
    assert list(make_schedule(e, r).epochs_per_round) == expected


def test_schedule_rejects_too_few_epochs():
    with pytest.raises(ValueError):
        make_schedule(3, 5)


def upd(cid, params, n, rnd=0):
    return ClientUpdate(cid, rnd, np.asarray(params, dtype=float), n)


def state(p, ids, rnd=0):
    return AggregatorState(np.zeros(p), frozenset(ids), rnd)


def test_fedavg_single_client_verbatim():
    v = np.array([0.1, 0.2, 0.3])
    out = fedavg([upd(0, v, 17)], state(3, [0]))
    assert np.array_equal(out, v)


def test_fedavg_hand_example():
    out = fedavg([upd(0, [1, 3], 1), upd(1, [3, 5], 3)], state(2, [0, 1]))
    assert out.tolist() == [2.5, 4.5]


def test_fedavg_equal_counts_is_mean():
    out = fedavg([upd(0, [1.0, 0.0], 4), upd(1, [2.0, 4.0], 4)], state(2, [0, 1]))
    assert np.allclose(out, [1.5, 2.0], atol=1e-15)


def test_fedavg_server_lr():
    st = AggregatorState(np.array([1.0, 1.0]), frozenset([0]), server_lr=0.5)
    assert fedavg([upd(0, [3.0, -1.0], 2)], st).tolist() == [2.0, 0.0]


def test_fedavg_missing_client():
    with pytest.raises(ProtocolError, match="missing clients \\[1\\]"):
        fedavg([upd(0, [1.0], 1)], state(1, [0, 1]))


def test_fedavg_shape_mismatch():
    with pytest.raises(ShapeError):
        fedavg([upd(0, [1.0, 2.0], 1), upd(1, [1.0], 1)], state(2, [0, 1]))


def test_fedavg_random_oracle_permutation_and_hull():
    g = np.random.default_rng(0)
    for _ in range(10):
        k, p = g.integers(1, 11), g.integers(1, 200)
        vecs = g.normal(size=(k, p))
        ns = g.integers(1, 1000, k)
        ups = [upd(i, vecs[i], int(ns[i])) for i in range(k)]
        out = fedavg(ups, state(p, range(k)))
        assert np.allclose(out, weighted_mean(vecs, ns.tolist()), rtol=0, atol=1e-12)
        perm = g.permutation(k)
        assert np.array_equal(fedavg([ups[i] for i in perm], state(p, range(k))), out)
        assert np.all(out >= vecs.min(axis=0) - 1e-12) and np.all(out <= vecs.max(axis=0) + 1e-12)


@pytest.fixture(scope="module")
def small_task():
    ds = synthesize_blobs(400, 5, 2, 3.0, 0)
    tr, te = split(ds, SplitSpec(0.8, True, 1))
    cfg = TrainConfig(ModelSpec("logistic_regression", 5, 2), "sgd", 0.1, 0.001, 64)
    return tr, te, cfg


def test_client_round_no_noise_equals_training(small_task):
    tr, _, cfg = small_task
    g0 = init_params(cfg.spec, Rng(0))
    rng = client_rng(5, 0, 0)
    u = client_round(tr, g0, 3, cfg, NoiseSpec(0.0), rng)
    ref, _ = train_epochs(cfg.spec, g0, make_optimizer("sgd", 0.1), tr, 3, 64, 0.001,
                          client_rng(5, 0, 0).child("train"))
    assert np.array_equal(u.params, ref)
    assert u.n_samples == tr.n_samples


def test_client_round_identity(small_task):
    tr, _, cfg = small_task
    g0 = init_params(cfg.spec, Rng(0))
    u = client_round(tr, g0, 0, cfg, NoiseSpec(0.0), Rng(1))
    assert np.array_equal(u.params, g0)
    assert u.train_seconds < 0.01


def test_noise_magnitude(small_task):
    tr, _, _ = small_task
    spec = ModelSpec("logistic_regression", 4999, 2)  # 10^4 parameters
    cfg = TrainConfig(spec, "sgd", 0.1)
    g0 = np.zeros(10_000)
    dummy = synthesize_blobs(10, 4999, 2, 0.0, 0)
    u = client_round(dummy, g0, 0, cfg, NoiseSpec(0.1), Rng(3))
    assert 0.008 <= np.mean(u.params ** 2) <= 0.012


def test_noise_streams_disjoint_per_client():
    a = client_rng(1, 0, 0).child("noise").standard_normal(5)
    b = client_rng(1, 1, 0).child("noise").standard_normal(5)
    c = client_rng(1, 0, 1).child("noise").standard_normal(5)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def shards_iid(ds, n, seed=0):
    from fedbench.partition import partition_iid
    out = []
    for cid, s in enumerate(partition_iid(ds, n, seed).shards(ds)):
        tr, te = split(s, SplitSpec(0.8, True, cid))
        out.append(ClientShard(cid, tr, te))
    return out


def test_single_client_equals_centralized(small_task):
    _, _, cfg = small_task
    ds = synthesize_blobs(300, 5, 2, 3.0, 2)
    shards = shards_iid(ds, 1)
    res = run_federated(shards, cfg, make_schedule(4, 1), NoiseSpec(0.0), seed=11)
    p0 = init_params(cfg.spec, Rng(11).child("init"))
    ref, _ = train_epochs(cfg.spec, p0, make_optimizer("sgd", 0.1), shards[0].train, 4, 64,
                          0.001, client_rng(11, 0, 0).child("train"))
    assert np.max(np.abs(res.params - ref)) <= 1e-9


def test_epochs_conserved_per_client(small_task, monkeypatch):
    import fedbench.federation as fed
    seen = []
    real = fed.train_epochs

    def spy(spec, params, opt, data, epochs, *a):
        seen.append(epochs)
        return real(spec, params, opt, data, epochs, *a)

    monkeypatch.setattr(fed, "train_epochs", spy)
    _, _, cfg = small_task
    shards = shards_iid(synthesize_blobs(300, 5, 2, 3.0, 2), 3)
    run_federated(shards, cfg, make_schedule(8, 5), NoiseSpec(0.0), seed=0)
    assert len(seen) == 15 and sum(seen) == 3 * 8


def test_rounds_records_and_traffic(small_task):
    _, _, cfg = small_task
    shards = shards_iid(synthesize_blobs(600, 5, 2, 3.0, 3), 3)
    res = run_federated(shards, cfg, make_schedule(6, 3), NoiseSpec(0.0), seed=2)
    assert [r.round for r in res.rounds] == [0, 1, 2]
    assert res.rounds[-1].auc == res.report.auc
    assert len(res.resources.client_train_seconds) == 3
    assert res.resources.traffic_bytes_total == 3 * (2 * 3 * (30 + 8 * 12) + 60)
    assert sum(res.resources.client_train_seconds) <= res.resources.global_wall_seconds


def test_tcp_transport_identical(small_task):
    _, _, cfg = small_task
    shards = shards_iid(synthesize_blobs(600, 5, 2, 3.0, 4), 3)
    a = run_federated(shards, cfg, make_schedule(4, 2), NoiseSpec(0.05), seed=9)
    b = run_federated(shards, cfg, make_schedule(4, 2), NoiseSpec(0.05), seed=9, transport="tcp")
    assert np.array_equal(a.params, b.params)
    assert [r.auc for r in a.rounds] == [r.auc for r in b.rounds]
    assert a.resources.client_traffic_bytes == b.resources.client_traffic_bytes


def test_client_failure_aborts(small_task):
    from fedbench.data import Dataset
    from fedbench.federation import FederationAborted
    _, _, cfg = small_task
    shards = shards_iid(synthesize_blobs(300, 5, 2, 3.0, 2), 2)
    bad = shards[1].train
    nan_x = bad.features.copy()
    nan_x[0, 0] = np.nan
    shards[1] = ClientShard(1, Dataset.__new__(Dataset), shards[1].test)
    object.__setattr__(shards[1].train, "features", nan_x)
    object.__setattr__(shards[1].train, "labels", bad.labels)
    object.__setattr__(shards[1].train, "n_classes", 2)
    object.__setattr__(shards[1].train, "class_names", ())
    for transport in ("inproc", "tcp"):
        with pytest.raises((FederationAborted, RuntimeError), match="client 1"):
            run_federated(shards, cfg, make_schedule(2, 2), NoiseSpec(0.0), 0, transport)
