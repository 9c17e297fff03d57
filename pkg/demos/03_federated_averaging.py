"""
Federated averaging
===================

A hand-sized FedAvg step, then a full run where one client with one round
reproduces centralized training.
"""

# %%
import numpy as np

from fedbench.config import ExperimentConfig
from fedbench.federation import AggregatorState, ClientUpdate, fedavg, make_schedule
from fedbench import harness

ups = [ClientUpdate(0, 0, np.array([1.0, 3.0]), n_samples=1),
       ClientUpdate(1, 0, np.array([3.0, 5.0]), n_samples=3)]
print(fedavg(ups, AggregatorState(np.zeros(2), frozenset({0, 1}))))  # [2.5 4.5]

# %%
# total epochs are fixed; rounds share them out
for e, r in ((8, 1), (8, 5), (70, 10)):
    print(e, r, make_schedule(e, r).epochs_per_round)

# %%
cfg = ExperimentConfig(n_samples=2000, n_features=50, n_clients=1, n_rounds=1, learning_rate=0.1)
res = harness.run_once(cfg)
shard = harness.make_shards(cfg, harness.dataset_for(cfg), harness.repeat_seed(cfg, 0))[0]
ref, _ = harness.centralized_fit(cfg, shard.train, harness.repeat_seed(cfg, 0))
print("max |federated - centralized| =", np.max(np.abs(res.params - ref)))

# %%
# more clients, more rounds
for c, r in ((3, 1), (10, 2), (50, 5)):
    out = harness.run_once(cfg.replace(n_clients=c, n_rounds=r))
    print(f"{c:3d} clients {r} rounds  AUC per round", [round(x.auc, 4) for x in out.rounds])
