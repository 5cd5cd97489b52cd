"""Cycle-level decision environments on top of the simulator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from trafficrl.a3c.actions import CYCLE_THRESHOLD, plan_violation
from trafficrl.encoding import build_neighbor_matrix, build_single_state, encode_row
from trafficrl.errors import ArgumentError, ConfigError
from trafficrl.rewards import RewardValue, combined_reward, global_reward, snapshot, step_reward
from trafficrl.sim.network import build_network, load_scenario
from trafficrl.sim.simulator import MetricsSample, Simulator, measure_density

FALLBACK_PLAN = (60.0, 60.0, 60.0, 60.0)


@dataclass
class Decision:
    """A controlled intersection whose cycle just ended (or the episode started)."""

    node: str
    observation: np.ndarray
    reward: RewardValue | None
    individual: RewardValue | None
    done: bool
    t: float


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(episode)]).generate_state(1, np.uint64)[0])


class SignalEnv:
    """One simulator instance; each controlled intersection decides once per cycle.

    ``observation`` selects the 8-vector (``"single"``) or the 4x8 neighbour
    matrix (``"multi"``). Uncontrolled intersections run ``fallback_plan``.
    ``fixed_seed`` keeps the same demand every episode (used for evaluation);
    otherwise episode ``k`` draws demand from ``(seed, k)``.
    """

    def __init__(
        self,
        scenario: Any,
        *,
        controlled: Sequence[str] | None = None,
        observation: str = "single",
        aggregate: str = "product",
        coordination: bool = False,
        global_weight: float = 0.5,
        seed: int = 0,
        fixed_seed: bool = False,
        window: float = 90.0,
        episode_duration: float | None = None,
        subset: Sequence[str] | None = None,
        observe_neighbors: bool = True,
        fallback_plan: Sequence[float] = FALLBACK_PLAN,
        check_actions: bool = True,
        record_events: bool = False,
    ) -> None:
        if observation not in ("single", "multi"):
            raise ConfigError(f"observation must be 'single' or 'multi', got {observation!r}")
        self.scenario = load_scenario(scenario)
        if episode_duration is not None:
            self.scenario.setdefault("sim", {})
            self.scenario["sim"] = {**self.scenario["sim"], "episode_duration": float(episode_duration)}
        self.subset = list(subset) if subset else None
        probe = build_network(self.scenario, subset=self.subset)
        self.node_ids = probe.ids
        self.controlled = list(controlled) if controlled is not None else list(self.node_ids)
        unknown = [c for c in self.controlled if c not in self.node_ids]
        if unknown:
            raise ConfigError(f"controlled intersections {unknown} not in scenario")
        self.observation = observation
        self.aggregate = aggregate
        self.coordination = bool(coordination)
        self.global_weight = float(global_weight)
        self.seed = int(seed)
        self.fixed_seed = fixed_seed
        self.window = float(window)
        self.observe_neighbors = observe_neighbors
        self.fallback_plan = tuple(float(g) for g in fallback_plan)
        self.check_actions = check_actions
        self.record_events = record_events
        self.episode = -1
        self.plans_checked = 0
        self.plan_violations: list[str] = []
        self.samples: list[MetricsSample] = []
        self.sim: Simulator | None = None

    @property
    def duration(self) -> float:
        return self.sim.config.episode_duration

    def current_seed(self) -> int:
        return self.seed if self.fixed_seed else episode_seed(self.seed, self.episode)

    def reset(self) -> list[Decision]:
        self.episode += 1
        topo = build_network(self.scenario, subset=self.subset, seed=self.current_seed())
        self.sim = Simulator(topo, record_events=self.record_events)
        self.samples = []
        self._cycle_start: dict[str, Any] = {}
        self._latest = {n: 0 for n in self.controlled}
        for nid in self.node_ids:
            if nid not in self.controlled:
                self.sim.set_plan(nid, self.fallback_plan)
        self._waiting = list(self.controlled)
        return [self._decision(n, None, None, False) for n in self.controlled]

    def observe(self, node_id: str) -> np.ndarray:
        topo = self.sim.topology
        node = topo.intersections[node_id]
        if self.observation == "single":
            return build_single_state(node)
        if self.observe_neighbors:
            return build_neighbor_matrix(node, topo)
        out = np.zeros((4, 8))
        out[0] = build_single_state(node)
        return out

    def _decision(self, node_id, reward, individual, done) -> Decision:
        return Decision(node_id, self.observe(node_id), reward, individual, done, self.sim.t)

    def _set(self, node_id: str, plan: Sequence[float]) -> None:
        if self.check_actions:
            self.plans_checked += 1
            why = plan_violation([int(g) if float(g).is_integer() else g for g in plan], CYCLE_THRESHOLD)
            if why:
                self.plan_violations.append(f"t={self.sim.t} {node_id}: {why}")
                raise ArgumentError(why)
        node = self.sim.topology.intersections[node_id]
        self._cycle_start[node_id] = snapshot(measure_density(node), self.sim.t)
        self.sim.set_plan(node_id, plan)

    def _reward(self, node_id: str) -> tuple[RewardValue, RewardValue]:
        node = self.sim.topology.intersections[node_id]
        after = snapshot(measure_density(node), self.sim.t)
        own = step_reward(self._cycle_start[node_id], after, self.aggregate)
        self._latest[node_id] = own.clipped
        if not self.coordination:
            return own, own
        g = global_reward([self._latest[n] for n in self.controlled], n_agents=None)
        return combined_reward(g, own.clipped, self.global_weight), own

    def advance(self, plans: Mapping[str, Sequence[float]]) -> list[Decision]:
        """Apply plans for every waiting intersection, then run until the
        next decision (or the end of the episode)."""
        if self.sim is None:
            raise ArgumentError("call reset() before advance()")
        missing = [n for n in self._waiting if n not in plans]
        if missing:
            raise ArgumentError(f"plans missing for waiting intersections {missing}")
        for nid in self._waiting:
            self._set(nid, plans[nid])
        self._waiting = []
        sim = self.sim
        end = sim.config.episode_duration
        window = self.window
        while True:
            sim.step()
            if window > 0 and abs(sim.t / window - round(sim.t / window)) < 1e-9:
                self.samples.append(sim.sample_window())
            if sim.t >= end - 1e-9:
                out = []
                for nid in self.controlled:
                    r, own = self._reward(nid) if sim.t > self._cycle_start[nid].t else (None, None)
                    out.append(self._decision(nid, r, own, True))
                self._waiting = []
                return out
            ready = []
            for nid in self.node_ids:
                if sim.needs_plan(nid):
                    if nid in self.controlled:
                        ready.append(nid)
                    else:
                        sim.set_plan(nid, self.fallback_plan)
            if ready:
                # rewards first so coordination sees every agent finishing now
                rewards = {nid: self._reward(nid) for nid in ready}
                if self.coordination and len(ready) > 1:
                    g = global_reward([self._latest[n] for n in self.controlled], n_agents=None)
                    rewards = {
                        nid: (combined_reward(g, own.clipped, self.global_weight), own)
                        for nid, (_, own) in rewards.items()
                    }
                self._waiting = ready
                return [self._decision(nid, *rewards[nid], False) for nid in ready]


class BanditEnv:
    """Degenerate one-intersection environment for learning sanity checks.

    Observations are constant; the reward is +1 exactly when the first
    approach receives the shortest green (action index 0 on head 0), else 0.
    """

    def __init__(self, episode_length: int = 16, seed: int = 0) -> None:
        self.controlled = ["X"]
        self.node_ids = ["X"]
        self.episode_length = episode_length
        self.seed = seed
        self.episode = -1
        self.plans_checked = 0
        self.plan_violations: list[str] = []
        self.samples: list[MetricsSample] = []
        self.observation = "single"
        self._obs = encode_row([1.0, 1.0, 1.0, 1.0], 3)

    def reset(self) -> list[Decision]:
        self.episode += 1
        self._t = 0
        return [Decision("X", self._obs.copy(), None, None, False, 0.0)]

    def advance(self, plans: Mapping[str, Sequence[float]]) -> list[Decision]:
        plan = list(plans["X"])
        self.plans_checked += 1
        why = plan_violation(plan)
        if why:
            self.plan_violations.append(why)
            raise ArgumentError(why)
        self._t += 1
        r = 1.0 if plan[0] == 20 else 0.0
        rv = RewardValue(r, 1 if r > 0 else 0)
        return [Decision("X", self._obs.copy(), rv, rv, self._t >= self.episode_length, float(self._t))]
