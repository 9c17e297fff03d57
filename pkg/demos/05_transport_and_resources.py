"""
Wire format, TCP transport and resource accounting
==================================================
"""

# %%
import numpy as np

from fedbench import transport as tp
from fedbench.config import ExperimentConfig
from fedbench.harness import run_experiment
from fedbench.meter import estimate_memory, predict_traffic
from fedbench.models import ModelSpec, parameter_count

msg = tp.WireMessage(tp.Kind.CLIENT_UPDATE, round=2, client_id=5, n_samples=1000,
                     params=np.array([1.5, -2.0]))
frame = tp.encode(msg)
print(len(frame), frame[:30].hex(" "))
print(tp.decode(frame)[0] == msg)

# %%
# the same run over the in-process channel and over localhost TCP
cfg = ExperimentConfig(n_samples=1200, n_features=20, n_clients=4, n_rounds=3, total_epochs=6,
                       learning_rate=0.1, batch_size=128, repeats=1)
a = run_experiment(cfg)[0]
b = run_experiment(cfg.replace(transport="tcp"))[0]
print("AUC", a.auc, b.auc, "bytes", a.traffic_bytes_total, b.traffic_bytes_total)

# %%
# traffic and memory for the two model kinds at 100 input features
for kind, opt in (("logistic_regression", "sgd"), ("sequential_dl", "adam")):
    spec = ModelSpec(kind, 100, 2)
    p = parameter_count(spec)
    mem = estimate_memory(spec, opt, batch_size=512, n_clients=10)
    print(f"{kind:20s} P={p:7d}  10 clients x 5 rounds: {predict_traffic(p, 10, 5) / 1e6:.2f} MB"
          f"  client memory ~{mem.client_bytes / 1e6:.2f} MB")
