"""Experiment configuration and its INI-style file format.

Example::

    [data]
    source = blobs          ; or a path to a CSV file
    label_column = label    ; CSV only: column name or index
    n_samples = 2000
    n_features = 50
    n_classes = 2
    separation = 6.0

    [model]
    kind = logistic_regression

    [training]
    optimizer = sgd
    l2 = 0.001
    total_epochs = 8

    [federation]
    n_clients = 3
    n_rounds = 1

    [experiment]
    repeats = 10
    seed = 0

    [sweep]
    n_clients = 3, 5, 10, 50
    n_rounds = 1, 2, 5, 10
    imbalance_level = default

Unknown keys are rejected. Empty values mean "unset" for optional fields.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

SECTIONS = {
    "data": ("source", "label_column", "has_header", "n_samples", "n_features", "n_classes",
             "separation", "data_seed", "standardize"),
    "model": ("model",),
    "training": ("optimizer", "learning_rate", "l2", "total_epochs", "batch_size"),
    "federation": ("n_clients", "n_rounds", "noise_sigma", "imbalance_level",
                   "train_fraction", "transport"),
    "experiment": ("repeats", "seed", "cv_folds"),
}
# file key -> field name where they differ
ALIASES = {("model", "kind"): "model"}

SWEEP_AXES = ("n_clients", "n_rounds", "noise_sigma", "imbalance_level")
STANDARD_CLIENTS = (3, 5, 10, 50)
STANDARD_ROUNDS = (1, 2, 5, 10)
STANDARD_SIGMAS = (0.0, 0.01, 0.03, 0.05, 0.07, 0.085, 0.1)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    source: str = "blobs"
    label_column: str = "-1"
    has_header: bool = True
    n_samples: int = 2000
    n_features: int = 50
    n_classes: int = 2
    separation: float = 6.0
    data_seed: int = 0
    standardize: bool = True
    model: str = "logistic_regression"
    optimizer: str = "sgd"
    learning_rate: float | None = None
    l2: float = 0.001
    total_epochs: int = 8
    batch_size: int = 512
    n_clients: int = 3
    n_rounds: int = 1
    noise_sigma: float = 0.0
    imbalance_level: float | None = None
    train_fraction: float = 0.8
    transport: str = "inproc"
    repeats: int = 10
    seed: int = 0
    cv_folds: int = 5

    def __post_init__(self):
        for name in ("n_samples", "n_features", "n_classes", "total_epochs", "batch_size",
                     "n_clients", "n_rounds", "repeats"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.model not in ("logistic_regression", "sequential_dl"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")

    @property
    def is_synthetic(self) -> bool:
        return self.source == "blobs"

    @property
    def lr(self) -> float:
        from .optim import DEFAULT_LR
        return DEFAULT_LR[self.optimizer] if self.learning_rate is None else self.learning_rate

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, pairs) -> "ExperimentConfig":
        """Apply ``key=value`` strings (as from the command line)."""
        changes = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"override {pair!r} is not key=value")
            changes[key.strip()] = _coerce(key.strip(), value.strip())
        return self.replace(**changes)

    def to_ini(self) -> str:
        out = []
        for section, keys in SECTIONS.items():
            out.append(f"[{section}]")
            for key in keys:
                file_key = "kind" if (section, key) == ("model", "model") else key
                out.append(f"{file_key} = {_render(getattr(self, key))}")
            out.append("")
        return "\n".join(out)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _render(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(name: str, raw: str):
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    typ = _FIELD_TYPES[name]
    optional = "None" in typ
    if raw == "":
        if optional:
            return None
        raise ConfigError(f"{name} needs a value")
    try:
        if typ.startswith("bool"):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def _parse_axis(name: str, raw: str):
    if name == "imbalance_level" and raw.strip().lower() == "default":
        return "default"
    return tuple(_coerce(name, v.strip()) for v in raw.split(",") if v.strip())


def parse_config(text: str) -> tuple[ExperimentConfig, dict]:
    """Parse config text into ``(config, sweep_axes)``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {}
    axes = {}
    for section in cp.sections():
        if section == "sweep":
            for key, raw in cp.items(section):
                if key not in SWEEP_AXES:
                    raise ConfigError(f"unknown sweep axis {key!r}")
                axes[key] = _parse_axis(key, raw)
            continue
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            name = ALIASES.get((section, key), key)
            if name not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[name] = _coerce(name, raw)
    return ExperimentConfig(**values), axes


def load_config(path) -> tuple[ExperimentConfig, dict]:
    return parse_config(Path(path).read_text(encoding="utf-8"))
