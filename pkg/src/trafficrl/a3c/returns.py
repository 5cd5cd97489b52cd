"""Rollout buffers and n-step discounted returns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from trafficrl.errors import ArgumentError
from trafficrl.nn.network import RecurrentState


@dataclass
class TrajectorySegment:
    initial_state: RecurrentState | None = None
    observations: list[np.ndarray] = field(default_factory=list)
    actions: list[np.ndarray] = field(default_factory=list)
    log_probs: list[float] = field(default_factory=list)
    entropies: list[float] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    bootstrap_value: float = 0.0

    def __len__(self) -> int:
        return len(self.observations)

    def append(self, obs, action, log_prob: float, entropy: float, value: float) -> None:
        self.observations.append(np.asarray(obs, dtype=float))
        self.actions.append(np.asarray(action, dtype=int))
        self.log_probs.append(float(log_prob))
        self.entropies.append(float(entropy))
        self.values.append(float(value))

    def complete(self) -> bool:
        return len(self.rewards) == len(self.observations)

    def check(self, t_max: int | None = None) -> None:
        n = len(self.observations)
        lens = {len(self.actions), len(self.log_probs), len(self.entropies), len(self.values), len(self.rewards)}
        if lens != {n}:
            raise ArgumentError("trajectory segment has per-step sequences of unequal length")
        if n < 1 or (t_max is not None and n > t_max):
            raise ArgumentError(f"segment length {n} outside 1..{t_max}")


def compute_returns_advantages(rewards, values, gamma: float, bootstrap_value: float):
    """Backward recursion ``R_i = r_i + gamma * R_{i+1}`` seeded with the
    bootstrap value; advantages are ``R_i - V_i``."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.size == 0:
        raise ArgumentError("cannot compute returns of an empty segment")
    if values.shape != rewards.shape:
        raise ArgumentError(f"rewards {rewards.shape} and values {values.shape} differ in length")
    returns = np.empty_like(rewards)
    running = float(bootstrap_value)
    for i in range(rewards.size - 1, -1, -1):
        running = rewards[i] + gamma * running
        returns[i] = running
    return returns, returns - values
