from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from trafficrl.errors import ConfigError
from trafficrl.rewards import AGGREGATES

REGIMES = ("single", "inrl", "shared_async")


@dataclass
class TrainConfig:
    regime: str = "single"
    coordination: bool = False
    seed: int = 0
    gamma: float = 0.99
    t_max: int = 8
    entropy_coeff: float = 0.01
    value_coeff: float = 0.5
    learning_rate: float = 1e-4
    grad_clip_norm: float = 40.0
    rms_decay: float = 0.99
    rms_eps: float = 1e-5
    num_workers: int | None = None
    total_epochs: int = 3000
    # network
    hidden: int = 64
    channels: int = 16
    kernel: int = 3
    shared_trunk: bool = True
    # rewards
    reward_aggregate: str = "product"
    global_weight: float = 0.5
    # environment
    observe_neighbors: bool = True
    subset: list[str] | None = None
    episode_duration: float | None = None
    window: float = 90.0
    async_mode: str = "threads"

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if isinstance(self.coordination, str):
            if self.coordination not in ("on", "off"):
                raise ConfigError(f"coordination must be on/off, got {self.coordination!r}")
            self.coordination = self.coordination == "on"
        checks = [
            (0.0 < self.gamma <= 1.0, "gamma must be in (0, 1]"),
            (self.t_max >= 1, "t_max must be >= 1"),
            (self.entropy_coeff >= 0, "entropy_coeff must be >= 0"),
            (self.value_coeff > 0, "value_coeff must be > 0"),
            (self.learning_rate > 0, "learning_rate must be > 0"),
            (self.grad_clip_norm > 0, "grad_clip_norm must be > 0"),
            (self.num_workers is None or self.num_workers >= 1, "num_workers must be >= 1"),
            (self.total_epochs >= 1, "total_epochs must be >= 1"),
            (self.reward_aggregate in AGGREGATES, f"reward_aggregate must be one of {sorted(AGGREGATES)}"),
            (0.0 <= self.global_weight <= 1.0, "global_weight must be in [0, 1]"),
            (self.async_mode in ("threads", "round_robin"), "async_mode must be threads or round_robin"),
            (self.window > 0, "window must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | None, **overrides: Any) -> "TrainConfig":
        """Build from a flat or nested mapping (``reward.aggregate`` style
        sections ``train``, ``nn``, ``reward``, ``inrl`` are flattened)."""
        flat: dict[str, Any] = {}
        aliases = {
            ("reward", "aggregate"): "reward_aggregate",
            ("reward", "global_weight"): "global_weight",
            ("reward", "global_fusion"): "coordination",
            ("nn", "shared_trunk"): "shared_trunk",
            ("inrl", "observe_neighbors"): "observe_neighbors",
        }
        for key, value in (data or {}).items():
            if isinstance(value, Mapping):
                for sub, v in value.items():
                    flat[aliases.get((key, sub), sub)] = v
            else:
                flat[key] = value
        flat.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(flat) - known)
        if unknown:
            raise ConfigError(f"unknown training config keys: {unknown}")
        return cls(**flat)

    @classmethod
    def load(cls, path: str | Path | None, **overrides: Any) -> "TrainConfig":
        data = {}
        if path is not None:
            data = yaml.safe_load(Path(path).read_text()) or {}
            if not isinstance(data, dict):
                raise ConfigError(f"config file {path} must contain a mapping")
        return cls.from_mapping(data, **overrides)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)
