"""Result records and their CSV/summary rendering.

The results CSV holds only deterministic columns so that reruns are
byte-identical. Wall-clock measurements go to a sibling ``*_timing.csv``
keyed by the same row index.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .config import ExperimentConfig

CONFIG_COLUMNS = tuple(f.name for f in fields(ExperimentConfig))
RESULT_COLUMNS = (
    "row_type", "repeat", "reason", "auc", "auc_std", "n_ok", "accuracy", "central_auc",
    "delta_accuracy_loss", "client_auc", "auc_trace", "param_count", "traffic_bytes_total",
    "traffic_bytes_per_client", "predicted_traffic_bytes", "memory_client_bytes",
    "memory_aggregator_bytes",
)
TIMING_COLUMNS = ("client_train_seconds", "client_train_seconds_max", "global_wall_seconds")
COLUMNS = CONFIG_COLUMNS + RESULT_COLUMNS


@dataclass(frozen=True)
class MetricsRecord:
    config: ExperimentConfig
    row_type: str = "run"  # run | summary | skipped | failed
    repeat: int | None = None
    reason: str = ""
    auc: float | None = None
    auc_std: float | None = None
    n_ok: int | None = None
    accuracy: float | None = None
    central_auc: float | None = None
    delta_accuracy_loss: float | None = None
    client_auc: float | None = None
    auc_trace: tuple[float, ...] = ()
    param_count: int | None = None
    traffic_bytes_total: int | None = None
    traffic_bytes_per_client: int | None = None
    predicted_traffic_bytes: int | None = None
    memory_client_bytes: int | None = None
    memory_aggregator_bytes: int | None = None
    client_train_seconds: float | None = None
    client_train_seconds_max: float | None = None
    global_wall_seconds: float | None = None

    @classmethod
    def from_config(cls, cfg: ExperimentConfig, **kw) -> "MetricsRecord":
        # echo the effective learning rate, not "default"
        return cls(cfg.replace(learning_rate=cfg.lr), **kw)

    def replace(self, **kw) -> "MetricsRecord":
        return dataclasses.replace(self, **kw)

    def row(self) -> dict:
        out = {name: getattr(self.config, name) for name in CONFIG_COLUMNS}
        for name in RESULT_COLUMNS + TIMING_COLUMNS:
            out[name] = getattr(self, name)
        return out


def fmt(v) -> str:
    """Cell formatting: floats to 6 significant digits, missing values empty."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else f"{v:.6g}"
    if isinstance(v, tuple):
        return ";".join(fmt(x) for x in v)
    return str(v)


def to_csv(records, columns=COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        row = rec.row()
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def summary_table(records, marginals: dict | None = None) -> str:
    """Plain-text table of per-cell summaries, then per-axis marginals."""
    lines = []
    head = f"{'clients':>7} {'rounds':>6} {'sigma':>6} {'imbal':>6} {'model':>20} " \
           f"{'auc':>8} {'std':>8} {'central':>8} {'delta':>8} {'status':>8}"
    lines.append(head)
    lines.append("-" * len(head))
    for r in records:
        if r.row_type not in ("summary", "skipped"):
            continue
        c = r.config
        lines.append(f"{c.n_clients:>7} {c.n_rounds:>6} {fmt(c.noise_sigma):>6} "
                     f"{fmt(c.imbalance_level) or 'iid':>6} {c.model:>20} "
                     f"{fmt(r.auc):>8} {fmt(r.auc_std):>8} {fmt(r.central_auc):>8} "
                     f"{fmt(r.delta_accuracy_loss):>8} {r.row_type:>8}")
    for axis, vals in (marginals or {}).items():
        lines.append("")
        lines.append(f"marginal AUC by {axis} (mean over the other axes)")
        for v in sorted(vals):
            lines.append(f"  {fmt(v):>8}  {fmt(vals[v])}")
    return "\n".join(lines) + "\n"


def emit_report(records, path, marginals: dict | None = None) -> dict[str, Path]:
    """Write ``path`` (results), ``<stem>_timing.csv`` and ``<stem>_summary.txt``."""
    records = list(records)
    if not records:
        raise ValueError("no records to report")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    timing = path.with_name(path.stem + "_timing.csv")
    summary = path.with_name(path.stem + "_summary.txt")
    path.write_text(to_csv(records), encoding="utf-8")
    timing.write_text(to_csv(records, ("row_type", "repeat", "n_clients", "n_rounds",
                                       "noise_sigma", "imbalance_level") + TIMING_COLUMNS),
                      encoding="utf-8")
    summary.write_text(summary_table(records, marginals), encoding="utf-8")
    return {"results": path, "timing": timing, "summary": summary}


_INT_COLS = {"repeat", "n_ok", "param_count", "traffic_bytes_total", "traffic_bytes_per_client",
             "predicted_traffic_bytes", "memory_client_bytes", "memory_aggregator_bytes"}
_FLOAT_COLS = {"auc", "auc_std", "accuracy", "central_auc", "delta_accuracy_loss", "client_auc"}


def load_report(path) -> list[dict]:
    """Parse a results CSV back into typed dicts (missing cells become ``None``)."""
    from .config import _coerce
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for k, v in raw.items():
                if k in CONFIG_COLUMNS:
                    row[k] = _coerce(k, v) if v != "" else None
                elif v == "":
                    row[k] = None
                elif k in _INT_COLS:
                    row[k] = int(v)
                elif k in _FLOAT_COLS:
                    row[k] = float(v)
                elif k == "auc_trace":
                    row[k] = tuple(float(x) for x in v.split(";"))
                else:
                    row[k] = v
            rows.append(row)
    return rows
