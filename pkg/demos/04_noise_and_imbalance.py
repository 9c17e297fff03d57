"""
Parameter noise and class imbalance
===================================

Gaussian noise is added to each client's parameters before upload. Imbalance
gives client i mostly class i. Each setting is repeated over several seeds.
"""

# %%
from fedbench.config import STANDARD_SIGMAS, ExperimentConfig
from fedbench.harness import default_imbalance_grid, run_experiment

binary = ExperimentConfig(n_samples=4000, n_features=500, separation=6.0, learning_rate=0.1,
                          l2=1.0, total_epochs=8, n_clients=5, repeats=5)
for sigma in STANDARD_SIGMAS:
    summ = run_experiment(binary.replace(noise_sigma=sigma))[-1]
    print(f"sigma {sigma:<6} AUC {summ.auc:.4f} +- {summ.auc_std:.4f}")

# %%
multi = ExperimentConfig(n_samples=4000, n_features=50, n_classes=5, separation=6.0,
                         learning_rate=0.1, l2=1.0, total_epochs=10, n_clients=5, repeats=5)
print("iid       AUC", round(run_experiment(multi)[-1].auc, 4))
for level in default_imbalance_grid(5):
    summ = run_experiment(multi.replace(imbalance_level=level))[-1]
    print(f"level {level:<4} AUC {summ.auc:.4f}")
