"""
Config-driven sweep
===================

Same thing as ``fedbench sweep -c demos/smoke.ini --out smoke.csv``.
"""

# %%
from pathlib import Path

from fedbench.config import load_config
from fedbench.harness import run_sweep
from fedbench.report import emit_report

here = Path(__file__).parent
cfg, axes = load_config(here / "smoke.ini")
print(axes)
res = run_sweep(cfg, axes)
paths = emit_report(res.records, here / "out" / "smoke.csv", res.marginals)
print(paths["summary"].read_text())
