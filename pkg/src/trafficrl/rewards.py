"""Density-based rewards and the shared/individual reward fusion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from trafficrl.errors import ArgumentError

GLOBAL_WEIGHT = 0.5


@dataclass(frozen=True)
class DensitySnapshot:
    values: tuple[float, ...]
    t: float

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 or not math.isfinite(v) for v in vals):
            raise ArgumentError(f"densities must be finite and >= 0, got {vals}")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class RewardValue:
    raw: float
    clipped: int


def clip_sign(x: float) -> int:
    return 1 if x > 0 else (-1 if x < 0 else 0)


def _values(s: DensitySnapshot | Sequence[float]) -> tuple[float, ...]:
    return s.values if isinstance(s, DensitySnapshot) else tuple(float(v) for v in s)


def density_product(s) -> float:
    return math.prod(_values(s))


def density_sum(s) -> float:
    return math.fsum(_values(s))


def density_sum_squares(s) -> float:
    return math.fsum(v * v for v in _values(s))


AGGREGATES: dict[str, Callable] = {
    "product": density_product,
    "sum": density_sum,
    "sum_squares": density_sum_squares,
}


def step_reward(before: DensitySnapshot, after: DensitySnapshot, aggregate: str = "product") -> RewardValue:
    """Drop in the chosen density aggregate between two instants, clipped to its sign."""
    if not before.t < after.t:
        raise ArgumentError(f"reward timestamps must increase, got {before.t} then {after.t}")
    try:
        agg = AGGREGATES[aggregate]
    except KeyError:
        raise ArgumentError(f"unknown aggregate {aggregate!r}; choose from {sorted(AGGREGATES)}") from None
    raw = agg(before) - agg(after)
    return RewardValue(raw, clip_sign(raw))


def global_reward(individual: Sequence[float], n_agents: int | None = 4) -> float:
    """Mean of the agents' clipped rewards.

    ``n_agents`` pins the expected arity (4 by default); pass ``None`` to
    accept any non-empty list.
    """
    vals = list(individual)
    if n_agents is not None and len(vals) != n_agents:
        raise ArgumentError(f"expected {n_agents} individual rewards, got {len(vals)}")
    if not vals:
        raise ArgumentError("global reward needs at least one agent")
    for v in vals:
        if v not in (-1, 0, 1):
            raise ArgumentError(f"individual rewards must be clipped to -1/0/+1, got {v}")
    return math.fsum(vals) / len(vals)


def combined_reward(global_value: float, individual: int, weight: float = GLOBAL_WEIGHT) -> RewardValue:
    """``weight * global + (1 - weight) * individual``, clipped to its sign."""
    if individual not in (-1, 0, 1):
        raise ArgumentError(f"individual reward must be -1/0/+1, got {individual}")
    if not 0.0 <= weight <= 1.0:
        raise ArgumentError(f"global weight must be in [0, 1], got {weight}")
    raw = weight * global_value + (1.0 - weight) * individual
    return RewardValue(raw, clip_sign(raw))


def snapshot(values: np.ndarray | Sequence[float], t: float) -> DensitySnapshot:
    return DensitySnapshot(tuple(float(v) for v in values), float(t))
