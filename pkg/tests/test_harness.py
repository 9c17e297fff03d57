import statistics

import numpy as np
import pytest

from fedbench import harness
from fedbench.config import ExperimentConfig
from fedbench.models import ModelSpec, parameter_count
from fedbench.numerics import derive_seed

SMALL = ExperimentConfig(n_samples=400, n_features=6, separation=3.0, learning_rate=0.1,
                         batch_size=64, total_epochs=4, repeats=3)


def test_baseline_separable():
    assert harness.run_baseline(ExperimentConfig(n_samples=1000, separation=6.0, batch_size=64,
                                                 learning_rate=0.1)).auc >= 0.99


def test_baseline_chance():
    auc = harness.run_baseline(ExperimentConfig(n_samples=1000, separation=0.0,
                                                learning_rate=0.1)).auc
    assert 0.4 <= auc <= 0.6


def test_single_repeat_rows():
    recs = harness.run_experiment(SMALL.replace(repeats=1))
    assert [r.row_type for r in recs] == ["run", "summary"]
    assert recs[1].auc == recs[0].auc and recs[1].auc_std == 0.0


def test_summary_is_mean_of_runs():
    recs = harness.run_experiment(SMALL)
    runs = [r.auc for r in recs if r.row_type == "run"]
    summ = recs[-1]
    assert len(runs) == 3 and summ.n_ok == 3
    assert summ.auc == statistics.fmean(runs)
    assert summ.auc_std == statistics.stdev(runs)
    assert all(r.traffic_bytes_total == r.predicted_traffic_bytes for r in recs[:-1])
    assert recs[0].param_count == parameter_count(ModelSpec("logistic_regression", 6, 2))


def test_seeds_vary_runs():
    a = harness.run_once(SMALL, 0).report.auc
    b = harness.run_once(SMALL, 1).report.auc
    c = harness.run_once(SMALL.replace(seed=5), 0).report.auc
    assert len({a, b, c}) > 1
    assert harness.repeat_seed(SMALL, 1) == derive_seed(0, "repeat/1")


def test_shards_standardized_on_pooled_train():
    ds = harness.dataset_for(SMALL)
    shards = harness.make_shards(SMALL, ds, 0)
    pooled = np.concatenate([s.train.features for s in shards])
    assert np.allclose(pooled.mean(axis=0), 0, atol=1e-12)
    assert sum(s.train.n_samples + s.test.n_samples for s in shards) == ds.n_samples


def test_infeasible_cell_skipped():
    recs = harness.run_experiment(SMALL.replace(n_clients=300))
    assert [r.row_type for r in recs] == ["skipped"]
    assert "class" in recs[0].reason
    recs = harness.run_experiment(SMALL.replace(total_epochs=2, n_rounds=5))
    assert recs[0].row_type == "skipped"


def test_imbalance_needs_one_client_per_class():
    recs = harness.run_experiment(SMALL.replace(imbalance_level=0.8, n_clients=3))
    assert recs[0].row_type == "skipped" and "n_clients == n_classes" in recs[0].reason


def test_sweep_cells_and_marginals():
    base = SMALL.replace(repeats=1, total_epochs=4)
    res = harness.run_sweep(base, {"n_clients": (2, 3), "n_rounds": (1, 2)})
    assert len(res.cells) == 4 and res.all_succeeded
    summ = {(r.config.n_clients, r.config.n_rounds): r.auc
            for r in res.records if r.row_type == "summary"}
    assert res.marginals["n_clients"][2] == statistics.fmean([summ[2, 1], summ[2, 2]])
    assert res.marginals["n_rounds"][2] == statistics.fmean([summ[2, 2], summ[3, 2]])


def test_standard_grid_sizes():
    assert len(harness.expand_axes(SMALL, harness.STANDARD_AXES)) == 16
    assert len(harness.expand_axes(SMALL, harness.STANDARD_NOISE_AXES)) == 7
    grid = harness.expand_axes(SMALL.replace(n_classes=5), {"imbalance_level": "default"})
    assert [g["imbalance_level"] for g in grid] == [0.2, 0.4, 0.6, 0.8, 0.9, 1.0]


def test_noise_axis_row_count():
    base = SMALL.replace(repeats=10, total_epochs=1, n_samples=200)
    res = harness.run_sweep(base, harness.STANDARD_NOISE_AXES)
    assert sum(r.row_type == "run" for r in res.records) == 70
    assert sum(r.row_type == "summary" for r in res.records) == 7


def test_sweep_rejects_empty_axes():
    with pytest.raises(ValueError):
        harness.expand_axes(SMALL, {})
