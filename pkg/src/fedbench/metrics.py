"""ROC-AUC (rank-sum form), client metric aggregation and the delta-accuracy gap."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class EvalReport:
    auc: float
    n_samples: int
    accuracy: float
    per_class_auc: tuple[float, ...] | None = None


def binary_auc(scores, labels) -> float:
    """P(random positive outranks random negative), ties counting one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("binary_auc needs both classes present")
    ranks = rankdata(s)  # average ranks for ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def multiclass_auc(probabilities, labels) -> tuple[float, tuple[float, ...]]:
    """Macro one-vs-rest AUC; classes absent from ``labels`` come back as NaN."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels)
    n_classes = p.shape[1]
    present = np.unique(y)
    if present.size < 2:
        raise ValueError("multiclass_auc needs at least two classes present")
    per_class = []
    for c in range(n_classes):
        if c in present:
            per_class.append(binary_auc(p[:, c], (y == c).astype(int)))
        else:
            per_class.append(float("nan"))
    if n_classes == 2:
        return per_class[1], tuple(per_class)
    macro = float(np.nanmean(per_class))
    return macro, tuple(per_class)


def evaluate(probabilities, labels) -> EvalReport:
    p = np.asarray(probabilities)
    y = np.asarray(labels)
    macro, per_class = multiclass_auc(p, y)
    acc = float(np.mean(p.argmax(axis=1) == y))
    return EvalReport(macro, int(y.size), acc, per_class if p.shape[1] > 2 else None)


def aggregate_client_metrics(reports, weights=None) -> EvalReport:
    """Sample-weighted mean of AUC and accuracy across clients."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")
    w = np.array([r.n_samples for r in reports] if weights is None else weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise ValueError("total weight must be positive")
    if len(reports) == 1:
        return reports[0]
    auc = float(np.dot(w, [r.auc for r in reports]) / total)
    acc = float(np.dot(w, [r.accuracy for r in reports]) / total)
    per_class = None
    if all(r.per_class_auc is not None for r in reports):
        per_class = tuple(np.dot(w, np.array([r.per_class_auc for r in reports])) / total)
    return replace(reports[0], auc=auc, accuracy=acc, n_samples=int(sum(r.n_samples for r in reports)),
                   per_class_auc=per_class)


def delta_accuracy_loss(fed: EvalReport, central: EvalReport) -> float:
    return abs(fed.auc - central.auc)
