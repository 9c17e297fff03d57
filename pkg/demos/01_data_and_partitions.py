"""
Data, splits and client partitions
==================================

Synthetic blobs stand in for a real CSV; the same Dataset type comes out of
``load_csv``.
"""

# %%
import numpy as np

from fedbench.data import SplitSpec, kfold, split, standardize, synthesize_blobs
from fedbench.partition import partition_iid, partition_imbalanced

ds = synthesize_blobs(n_samples=1000, n_features=8, n_classes=5, separation=4.0, seed=0)
print(ds.n_samples, ds.n_features, ds.class_counts())

# %%
# 80:20 stratified split, then standardize with train statistics only
train, test = split(ds, SplitSpec(train_fraction=0.8, stratified=True, seed=1))
train_s, (test_s,), scaler = standardize(train, [test])
print("train", train.class_counts(), "test", test.class_counts())
print("train means after scaling", np.round(train_s.features.mean(axis=0), 12))

# %%
# 5-fold CV: every sample lands in exactly one validation fold
sizes = [va.n_samples for _, va in kfold(ds, 5, seed=2)]
print("fold sizes", sizes, "sum", sum(sizes))

# %%
# IID: each client gets every class in proportion
plan = partition_iid(ds, n_clients=5, seed=3)
print("IID histograms\n", plan.histograms(ds))

# %%
# Imbalanced: client i holds `level` of its data from class i
for level in (0.2, 0.6, 1.0):
    plan = partition_imbalanced(ds, level, seed=3)
    print(f"level {level}\n", plan.histograms(ds))
