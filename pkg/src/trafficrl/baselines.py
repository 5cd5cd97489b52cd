"""Fixed Signal Timing (round-robin) baselines."""

from __future__ import annotations

from dataclasses import dataclass

from trafficrl.errors import ArgumentError

STANDARD_PERIODS = (60, 90, 120)


@dataclass(frozen=True)
class FstController:
    """Gives every approach the same green, every cycle, in the fixed phase order.

    FST periods are not bound by the RL action set (90 and 120 s greens are
    allowed).
    """

    period: float
    rl: bool = False

    def __post_init__(self) -> None:
        if not self.period > 0:
            raise ArgumentError(f"FST period must be > 0, got {self.period}")

    @property
    def label(self) -> str:
        return f"FST{self.period:g}"

    def reset(self) -> None:
        pass

    def plan(self, decision=None) -> tuple[float, float, float, float]:
        return fst_plan(self)


def fst_plan(controller: FstController) -> tuple[float, float, float, float]:
    p = float(controller.period)
    return (p, p, p, p)


def fst_cycle(controller: FstController, intergreen: float = 0.0) -> float:
    return 4 * float(controller.period) + 4 * intergreen


def parse_fst(label: str) -> FstController:
    """``"FST60"``, ``"fst-90"`` or ``"120"`` -> controller."""
    text = str(label).upper().replace("FST", "").strip("-_ ")
    try:
        return FstController(float(text))
    except ValueError:
        raise ArgumentError(f"not an FST label: {label!r}") from None


@dataclass(frozen=True)
class FixedPlanController:
    """Repeats one arbitrary four-phase plan every cycle."""

    greens: tuple[float, float, float, float]
    rl: bool = False

    def __post_init__(self) -> None:
        if len(self.greens) != 4 or not all(g > 0 for g in self.greens):
            raise ArgumentError(f"fixed plan needs four positive greens, got {self.greens}")

    @property
    def label(self) -> str:
        return "FIX-" + "-".join(f"{g:g}" for g in self.greens)

    def reset(self) -> None:
        pass

    def plan(self, decision=None) -> tuple[float, float, float, float]:
        return tuple(float(g) for g in self.greens)
