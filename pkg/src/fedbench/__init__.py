"""Federated averaging simulator and benchmark harness."""

from .config import ExperimentConfig, load_config, parse_config
from .data import Dataset, SplitSpec, kfold, load_csv, split, standardize, synthesize_blobs
from .federation import fedavg, make_schedule, run_federated
from .harness import run_baseline, run_experiment, run_sweep
from .metrics import binary_auc, multiclass_auc
from .models import ModelSpec, parameter_count
from .report import emit_report

__version__ = "0.1.0"

__all__ = [
    "Dataset", "ExperimentConfig", "ModelSpec", "SplitSpec", "binary_auc", "emit_report",
    "fedavg", "kfold", "load_config", "load_csv", "make_schedule", "multiclass_auc",
    "parameter_count", "parse_config", "run_baseline", "run_experiment", "run_federated",
    "run_sweep", "split", "standardize", "synthesize_blobs",
]
