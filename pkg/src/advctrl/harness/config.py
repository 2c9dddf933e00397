"""Experiment configuration: flat ``section.key = value`` text files.

Lines starting with '#' are comments.  Vectors are comma-separated
(``goal.target = 1,-1``); lists of bandit arm specs are
semicolon-separated because Gaussian specs contain commas
(``bandit.arms = bernoulli:0.8;bernoulli:0.2``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

VALID_KINDS = ("poison-batch", "poison-seq", "evade", "defend", "shape-rewards")

__all__ = ["ConfigError", "ExperimentConfig", "VALID_KINDS",
           "parse_config_text", "load_experiment_config"]


class ConfigError(ValueError):
    """Invalid or missing configuration, naming the offending field."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def parse_config_text(text: str) -> dict:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        values[key] = value.strip()
    return values


_INF_WORDS = {"inf": np.inf, "infinity": np.inf}


@dataclass
class ExperimentConfig:
    """Validated experiment description with typed field access."""

    kind: str
    values: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    out_dir: str | None = None

    # -- typed accessors (errors carry the field path) -------------------

    def has(self, key: str) -> bool:
        return key in self.values

    def raw(self, key: str, default=None, required: bool = False) -> str | None:
        if key in self.values:
            return self.values[key]
        if required:
            raise ConfigError(f"missing required field: {key}", key=key)
        return default

    def get_str(self, key: str, default=None, required: bool = False,
                choices=None) -> str | None:
        value = self.raw(key, default, required)
        if value is not None and choices is not None and value not in choices:
            raise ConfigError(
                f"{key}: expected one of {', '.join(choices)}; got {value!r}", key=key
            )
        return value

    def get_float(self, key: str, default=None, required: bool = False) -> float | None:
        value = self.raw(key, None, required)
        if value is None:
            return default
        if value.lower() in _INF_WORDS:
            return float(_INF_WORDS[value.lower()])
        try:
            return float(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key}: expected a number, got {value!r}", key=key) from exc

    def get_int(self, key: str, default=None, required: bool = False) -> int | None:
        value = self.raw(key, None, required)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {value!r}", key=key) from exc

    def get_bool(self, key: str, default=None, required: bool = False) -> bool | None:
        value = self.raw(key, None, required)
        if value is None:
            return default
        low = value.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {value!r}", key=key)

    def get_vector(self, key: str, default=None, required: bool = False) -> np.ndarray | None:
        value = self.raw(key, None, required)
        if value is None:
            return default
        try:
            return np.array([float(v) for v in value.split(",") if v.strip() != ""])
        except ValueError as exc:
            raise ConfigError(f"{key}: expected comma-separated numbers, got {value!r}",
                              key=key) from exc

    def get_ints(self, key: str, default=None, required: bool = False) -> list | None:
        value = self.raw(key, None, required)
        if value is None:
            return default
        try:
            return [int(v) for v in value.split(",") if v.strip() != ""]
        except ValueError as exc:
            raise ConfigError(f"{key}: expected comma-separated integers, got {value!r}",
                              key=key) from exc

    def get_norm(self, key: str, default: float = 2.0) -> float:
        value = self.raw(key, None, False)
        if value is None:
            return default
        if value.lower() in _INF_WORDS:
            return np.inf
        if value in ("1", "2"):
            return float(value)
        raise ConfigError(f"{key}: expected 1, 2 or inf, got {value!r}", key=key)


_REQUIRED = {
    "poison-batch": ["learner.lambda", "goal.kind", "surface.kind"],
    "poison-seq": ["learner.eta", "init.weights", "run.horizon", "goal.kind"],
    "evade": ["model.weights", "item.features"],
    "defend": ["defense.epsilon"],
    "shape-rewards": ["bandit.arms", "attack.target_arm", "attack.lambda", "run.horizon"],
}


def _validate(config: ExperimentConfig) -> None:
    for key in _REQUIRED[config.kind]:
        if not config.has(key):
            raise ConfigError(f"missing required field: {key}", key=key)
    if config.kind in ("poison-batch", "defend"):
        if not (config.has("data.path") or config.has("data.inline")
                or config.has("data.synthetic")):
            raise ConfigError(
                "missing required field: one of data.path, data.inline, data.synthetic",
                key="data.path",
            )


def from_values(values: dict) -> ExperimentConfig:
    kind = values.get("experiment.kind")
    if kind is None:
        raise ConfigError("missing required field: experiment.kind", key="experiment.kind")
    if kind not in VALID_KINDS:
        raise ConfigError(
            f"experiment.kind: unknown kind {kind!r}; valid kinds are "
            + ", ".join(VALID_KINDS),
            key="experiment.kind",
        )
    config = ExperimentConfig(kind=kind, values=dict(values))
    config.seeds = config.get_ints("run.seeds", required=True)
    if not config.seeds:
        raise ConfigError("run.seeds: at least one seed is required", key="run.seeds")
    config.out_dir = config.raw("run.out")
    _validate(config)
    return config


def load_experiment_config(path) -> ExperimentConfig:
    return from_values(parse_config_text(Path(path).read_text()))
