"""Run configuration: one JSON document for training and evaluation.

Precedence is command-line flags > config file > per-environment
defaults > dataclass defaults. Unknown keys are rejected at every level.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional, Union

from .errors import ConfigError
from .evaluation import DEFAULT_AMPLITUDES, DEFAULT_EPISODES_PER_CELL
from .sac import SacConfig
from .serialization import read_json, write_json
from .trainer import TrainerConfig

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "ADVSAC_OUTPUT_ROOT"


@dataclass
class SweepDefaults:
    amplitudes: tuple[float, ...] = DEFAULT_AMPLITUDES
    episodes_per_cell: int = DEFAULT_EPISODES_PER_CELL
    deterministic_policy: bool = True

    def __post_init__(self) -> None:
        self.amplitudes = tuple(float(a) for a in self.amplitudes)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["amplitudes"] = list(self.amplitudes)
        return d


# Desk-scale settings that train each environment within its budget.
ENV_DEFAULTS: dict[str, dict[str, dict[str, Any]]] = {
    "pointgoal": {
        "trainer": {"mode": "internal", "amplitude": 0.0, "her": "none", "n_iter": 1,
                    "m_protagonist_episodes": 1000, "n_adversary_episodes": 0},
        "protagonist": {"hidden": [64, 64], "temperature": 0.05, "batch_size": 128,
                        "actor_lr": 1e-3, "critic_lr": 1e-3},
        "adversary": {"hidden": [64, 64], "temperature": 0.05, "batch_size": 128,
                      "actor_lr": 1e-3, "critic_lr": 1e-3},
    },
    "turnlite": {
        "trainer": {"mode": "internal", "amplitude": 0.6, "her": "none"},
        "protagonist": {"hidden": [64, 64], "temperature": 0.05, "batch_size": 128,
                        "actor_lr": 1e-3, "critic_lr": 1e-3},
        "adversary": {"hidden": [64, 64], "temperature": 0.05, "batch_size": 128,
                      "actor_lr": 1e-3, "critic_lr": 1e-3},
    },
    "picklite2d": {
        "trainer": {"mode": "external", "amplitude": 0.0, "her": "future", "n_iter": 25,
                    "m_protagonist_episodes": 150, "n_adversary_episodes": 50},
        "protagonist": {"hidden": [64, 64], "temperature": 0.05, "batch_size": 128,
                        "actor_lr": 1e-3, "critic_lr": 1e-3},
        # a warmer adversary keeps exploring until it finds the block
        "adversary": {"hidden": [64, 64], "temperature": 0.2, "batch_size": 128,
                      "actor_lr": 1e-3, "critic_lr": 1e-3},
    },
    "bandit": {
        "trainer": {"mode": "external", "amplitude": 0.0, "her": "none", "n_iter": 2000,
                    "m_protagonist_episodes": 1, "n_adversary_episodes": 1, "warmup_steps": 64},
        "protagonist": {"hidden": [32, 32], "batch_size": 64, "actor_lr": 1e-3, "critic_lr": 1e-3},
        "adversary": {"hidden": [32, 32], "batch_size": 64, "actor_lr": 1e-3, "critic_lr": 1e-3},
    },
}

SECTIONS = ("trainer", "protagonist", "adversary", "sweep")
_SECTION_TYPES = {"trainer": TrainerConfig, "protagonist": SacConfig, "adversary": SacConfig, "sweep": SweepDefaults}


def _check_keys(section: str, values: dict[str, Any]) -> None:
    known = {f.name for f in fields(_SECTION_TYPES[section])}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown field(s) in [{section}]: {', '.join(unknown)}")


def _build(section: str, values: dict[str, Any]):
    _check_keys(section, values)
    try:
        return _SECTION_TYPES[section](**values)
    except TypeError as exc:
        raise ConfigError(f"bad value in [{section}]: {exc}") from None


@dataclass
class RunConfig:
    """Every field has a default; ``output_dir`` is relative to the output
    root (``$ADVSAC_OUTPUT_ROOT`` when set) unless absolute."""

    schema_version: int = SCHEMA_VERSION
    output_dir: str = "runs/default"
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    protagonist: SacConfig = field(default_factory=lambda: SacConfig(role="maximizer"))
    adversary: SacConfig = field(default_factory=lambda: SacConfig(role="minimizer"))
    sweep: SweepDefaults = field(default_factory=SweepDefaults)

    def __post_init__(self) -> None:
        if self.protagonist.role != "maximizer":
            raise ConfigError("the protagonist must be the maximizer")
        if self.adversary.role != "minimizer":
            raise ConfigError("the adversary must be the minimizer")
        if self.protagonist.gamma != self.adversary.gamma:
            raise ConfigError("both agents must share gamma")

    @property
    def seed(self) -> int:
        return self.trainer.seed

    def resolved_output_dir(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            return Path(root) / out
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "output_dir": self.output_dir,
            "trainer": self.trainer.to_dict(),
            "protagonist": self.protagonist.to_dict(),
            "adversary": self.adversary.to_dict(),
            "sweep": self.sweep.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any], overrides: Optional[dict[str, dict[str, Any]]] = None) -> "RunConfig":
        """Layer per-env defaults, ``obj`` and ``overrides`` (section -> fields)."""
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        # "invocation" records how an effective config was produced; informational only
        unknown = sorted(set(obj) - {"schema_version", "output_dir", "invocation", *SECTIONS})
        if unknown:
            raise ConfigError(f"unknown top-level field(s): {', '.join(unknown)}")
        overrides = overrides or {}
        for name, section in [(k, obj.get(k, {})) for k in SECTIONS] + list(overrides.items()):
            if name not in SECTIONS and name != "run":
                raise ConfigError(f"unknown section {name!r}")
            if not isinstance(section, dict):
                raise ConfigError(f"[{name}] must be an object")

        env_id = overrides.get("trainer", {}).get("env_id") or obj.get("trainer", {}).get("env_id") or TrainerConfig.env_id
        if env_id not in ENV_DEFAULTS:
            raise ConfigError(f"unknown env_id {env_id!r}; known: {sorted(ENV_DEFAULTS)}")
        merged: dict[str, dict[str, Any]] = {}
        for name in SECTIONS:
            layer = dict(ENV_DEFAULTS[env_id].get(name, {}))
            layer.update(obj.get(name, {}))
            layer.update(overrides.get(name, {}))
            merged[name] = layer
        merged["trainer"]["env_id"] = env_id
        merged["protagonist"].setdefault("role", "maximizer")
        merged["adversary"].setdefault("role", "minimizer")
        output_dir = overrides.get("run", {}).get("output_dir") or obj.get("output_dir") or cls.output_dir
        return cls(
            schema_version=version,
            output_dir=str(output_dir),
            **{name: _build(name, merged[name]) for name in SECTIONS},
        )

    @classmethod
    def load(cls, path: Optional[Union[str, Path]], overrides: Optional[dict[str, dict[str, Any]]] = None) -> "RunConfig":
        obj = {} if path is None else read_json(path)
        return cls.from_dict(obj, overrides)

    def write(self, path: Union[str, Path]) -> Path:
        return write_json(self.to_dict(), path)
