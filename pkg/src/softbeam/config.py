"""Flat experiment configuration.

Config files are plain text, one `key = value` per line, `#` comments.
Every key names a TrainConfig field; unknown keys are hard errors so a typo
cannot silently fall back to a default in the middle of a grid experiment.
Command-line flags mirror the same keys and override file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .beam import AnnealSchedule
from .data import TASK_KINDS
from .errors import ConfigError
from .model import ATTENTION_MODES, ENCODER_MODES, NORMALIZATION_MODES

OBJECTIVES = ("teacher-forcing", "self-normalized", "soft-beam")
OPTIMIZERS = ("sgd", "adam")
DEV_METRICS = ("accuracy", "bleu")
WARM_START_OBJECTIVES = ("none", "teacher-forcing", "self-normalized")


@dataclass
class TrainConfig:
    task_kind: str = "tagging"
    train_path: str = ""
    dev_path: str = ""
    out_dir: str = "run"

    embed_dim: int = 16
    hidden_dim: int = 16
    encoder_mode: str = "unidirectional"
    attention_mode: str = "fixed"
    normalization_mode: str = "local"

    objective: str = "teacher-forcing"
    warm_start: str = ""
    warm_start_objective: str = "none"
    lam: float = 0.0
    beam_k: int = 5
    alpha0: float = 1.0
    alpha_growth: float = 2.0
    alpha_max: float = 1000.0

    optimizer: str = "sgd"
    learning_rate: float = 0.3
    clip_norm: float = 5.0
    batch_size: int = 4
    epochs: int = 10
    seed: int = 0
    restarts: int = 3
    dev_metric: str = "accuracy"

    def __post_init__(self):
        def check(value, allowed, what):
            if value not in allowed:
                raise ConfigError(f"{what} must be one of {allowed}, "
                                  f"got {value!r}")
        check(self.task_kind, TASK_KINDS, "task_kind")
        check(self.encoder_mode, ENCODER_MODES, "encoder_mode")
        check(self.attention_mode, ATTENTION_MODES, "attention_mode")
        check(self.normalization_mode, NORMALIZATION_MODES,
              "normalization_mode")
        check(self.objective, OBJECTIVES, "objective")
        check(self.optimizer, OPTIMIZERS, "optimizer")
        check(self.dev_metric, DEV_METRICS, "dev_metric")
        check(self.warm_start_objective, WARM_START_OBJECTIVES,
              "warm_start_objective")
        for name in ("embed_dim", "hidden_dim", "beam_k", "batch_size",
                     "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.clip_norm <= 0:
            raise ConfigError("clip_norm must be > 0")
        if self.objective == "soft-beam" and not self.warm_start:
            raise ConfigError(
                "soft-beam training requires a warm_start checkpoint")

    @property
    def anneal(self) -> AnnealSchedule:
        return AnnealSchedule(self.alpha0, self.alpha_growth, self.alpha_max)

    def warm_start_warning(self) -> str | None:
        """Flag the unstable corner: global-mode search-aware training from
        a warm start that was not trained toward log Z = 0."""
        if (self.objective == "soft-beam"
                and self.normalization_mode == "global"
                and self.warm_start_objective != "self-normalized"):
            return ("warning: globally normalized search-aware training "
                    "warm-started from a non-self-normalized checkpoint; "
                    "expect unnormalized scores to be badly scaled")
        return None

    def to_text(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)}"
                 for f in dataclasses.fields(self)]
        return "".join(line + "\n" for line in lines)


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELDS[name].type
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"key {name}: cannot parse {raw!r} as {kind}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse `key = value` lines into a typed dict; unknown keys error."""
    values: dict = {}
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}: line {i}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{source}: line {i}: unknown key {key!r}")
        values[key] = _coerce(key, raw.strip())
    return values


def load_config(path: str | Path | None = None,
                overrides: dict | None = None,
                defaults: dict | None = None) -> TrainConfig:
    """Merge config sources: dataclass defaults < `defaults` (already
    typed) < config file < `overrides` (flag strings, coerced)."""
    values: dict = dict(defaults or {})
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        values.update(parse_config_text(p.read_text(), source=str(p)))
    for key, raw in (overrides or {}).items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    return TrainConfig(**values)
