"""Mapping between policy head indices and green-time plans."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from trafficrl.errors import ArgumentError

GREEN_CHOICES = (20, 25, 30, 35, 40, 45, 50, 55, 60)
CYCLE_THRESHOLD = 240.0


@dataclass(frozen=True)
class GreenPlan:
    greens: tuple[int, int, int, int]
    threshold: float = CYCLE_THRESHOLD

    def __post_init__(self) -> None:
        violation = plan_violation(self.greens, self.threshold)
        if violation:
            raise ArgumentError(violation)

    @property
    def cycle(self) -> int:
        return sum(self.greens)


def plan_violation(greens: Sequence[float], threshold: float = CYCLE_THRESHOLD) -> str | None:
    """Describe why ``greens`` is not a valid RL action, or return None."""
    if len(greens) != 4:
        return f"a green plan needs 4 durations, got {len(greens)}"
    for g in greens:
        if g not in GREEN_CHOICES:
            return f"green time {g} not in {GREEN_CHOICES}"
    if sum(greens) > threshold:
        return f"cycle {sum(greens)} s exceeds threshold {threshold} s"
    return None


def action_to_plan(indices: Sequence[int]) -> GreenPlan:
    idx = list(indices)
    if len(idx) != 4:
        raise ArgumentError(f"expected 4 action indices, got {len(idx)}")
    for i in idx:
        if int(i) != i or not 0 <= i < len(GREEN_CHOICES):
            raise ArgumentError(f"action index {i!r} outside 0..8")
    return GreenPlan(tuple(GREEN_CHOICES[int(i)] for i in idx))


def plan_to_action(greens: Sequence[int]) -> list[int]:
    try:
        return [GREEN_CHOICES.index(int(g)) for g in greens]
    except ValueError:
        raise ArgumentError(f"plan {list(greens)} is not in the action set") from None
