"""Discrete-time point-queue simulation of a signalised network.

Each approach is a vertical queue: a vehicle entering a section becomes
eligible to cross the stop line once its free-flow travel time has elapsed,
and is then discharged FIFO at the saturation flow while its approach is
green. Discharged vehicles follow the intersection's turning fractions to a
downstream section or leave the network.
"""

from __future__ import annotations

import hashlib
import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from trafficrl.errors import ArgumentError, SimulationError
from trafficrl.sim.arrivals import arrival_schedule, schedule_digest, section_rng
from trafficrl.sim.network import DIRECTIONS, IntersectionNode, NetworkTopology, SimConfig, VehicleRecord

_EPS = 1e-9


@dataclass
class ExitEvent:
    t: float
    node: str
    approach: int
    vehicle: int
    delay_s_per_km: float
    target: str | None


@dataclass
class DelayReading:
    value: float
    samples: int

    @property
    def no_sample(self) -> bool:
        return self.samples == 0


@dataclass
class MetricsSample:
    t: float
    avg_delay: float
    avg_density: float
    per_intersection_delay: dict[str, float] = field(default_factory=dict)
    per_intersection_density: dict[str, float] = field(default_factory=dict)


@dataclass
class CycleResult:
    node: str
    plan: tuple[float, ...]
    start: float
    duration: float
    density_before: np.ndarray
    density_after: np.ndarray
    discharged: np.ndarray


class _Signal:
    __slots__ = ("green_steps", "phase", "steps_left", "all_red", "start")

    def __init__(self) -> None:
        self.green_steps: list[int] | None = None
        self.phase = 0
        self.steps_left = 0
        self.all_red = False
        self.start = 0.0


def measure_density(node: IntersectionNode) -> np.ndarray:
    """Vehicles per kilometre on each of the four approaches."""
    return np.array([len(s.queue) / s.length for s in node.approaches])


class Simulator:
    """Single-writer simulation state for one topology instance.

    All randomness comes from ``seed`` (default ``topology.sim.rng_seed``):
    boundary arrival times are drawn up front per section, so they do not
    depend on the signal decisions taken during the run.
    """

    def __init__(
        self,
        topology: NetworkTopology,
        config: SimConfig | None = None,
        seed: int | None = None,
        record_events: bool = False,
        horizon: float | None = None,
    ) -> None:
        self.topology = topology
        self.config = config or topology.sim
        self.seed = int(self.config.rng_seed if seed is None else seed)
        self.dt = float(self.config.timestep)
        self.t = 0.0
        self._nodes = list(topology.intersections.values())
        self._node_pos = {n.id: i for i, n in enumerate(self._nodes)}
        self._signals = {n.id: _Signal() for n in self._nodes}
        self._inter_steps = self._to_steps(self.config.intergreen, "intergreen")
        self._sat = float(self.config.saturation_flow)
        self._credit = [0.0] * len(topology.sections)
        self._sent = [[[0] * 4 for _ in range(4)] for _ in self._nodes]
        self._next_id = 0

        horizon = self.config.episode_duration + 600.0 if horizon is None else horizon
        self._schedules: list[np.ndarray] = []
        self._boundary = []
        for sec in topology.boundary_sections:
            sched = arrival_schedule(
                sec.arrival_kind, sec.arrival_shape, sec.arrival_scale, horizon, section_rng(self.seed, sec.index)
            )
            self._schedules.append(sched)
            if len(sched):
                self._boundary.append([sec, sched.tolist(), 0, deque()])

        self.entered = 0
        self.exited = 0
        self.exit_log: dict[str, tuple[list[float], list[float]]] = {n.id: ([], []) for n in self._nodes}
        self._win_delay = [0.0] * len(self._nodes)
        self._win_count = [0] * len(self._nodes)
        self._win_density = [0.0] * len(self._nodes)
        self._win_steps = 0
        self._total_len = [sum(s.length for s in n.approaches) for n in self._nodes]
        self.events: list[str] | None = [] if record_events else None

    # ------------------------------------------------------------------ plans
    def _to_steps(self, seconds: float, what: str) -> int:
        n = seconds / self.dt
        if seconds < 0 or abs(n - round(n)) > 1e-9:
            raise ArgumentError(f"{what} ({seconds}) must be a non-negative multiple of timestep {self.dt}")
        return int(round(n))

    def set_plan(self, node_id: str, greens: Sequence[float]) -> None:
        """Start a new cycle at ``node_id`` with the given green durations."""
        if len(greens) != 4:
            raise ArgumentError(f"plan for {node_id} must have 4 greens, got {len(greens)}")
        steps = [self._to_steps(float(g), f"green time for {node_id}") for g in greens]
        if sum(steps) + 4 * self._inter_steps == 0:
            raise ArgumentError(f"plan for {node_id} has zero cycle length")
        node = self.topology.intersections[node_id]
        sig = self._signals[node_id]
        sig.green_steps = steps
        sig.start = self.t
        node.active_plan = tuple(float(g) for g in greens)
        self._credit[node.approaches[node.current_phase].index] = 0.0
        sig.phase = 0
        sig.all_red = False
        sig.steps_left = steps[0]
        node.current_phase = 0
        self._settle(node, sig)

    def needs_plan(self, node_id: str) -> bool:
        return self._signals[node_id].green_steps is None

    def cycle_elapsed(self, node_id: str) -> float:
        return self.t - self._signals[node_id].start

    def _settle(self, node: IntersectionNode, sig: _Signal) -> bool:
        """Advance through finished stages; return True when the cycle ended."""
        while sig.steps_left == 0:
            if not sig.all_red and self._inter_steps > 0:
                self._credit[node.approaches[sig.phase].index] = 0.0
                sig.all_red = True
                sig.steps_left = self._inter_steps
                continue
            self._credit[node.approaches[sig.phase].index] = 0.0
            if sig.phase == 3:
                sig.green_steps = None
                sig.all_red = False
                node.active_plan = None
                return True
            sig.phase += 1
            sig.all_red = False
            sig.steps_left = sig.green_steps[sig.phase]
            node.current_phase = sig.phase
        return False

    # ------------------------------------------------------------------ routing
    def _route(self, pos: int, node: IntersectionNode, a: int) -> int:
        frac = node.turn_matrix[a]
        sent = self._sent[pos][a]
        total = sum(sent) + 1
        best, best_v = -1, -math.inf
        for d in range(4):
            f = frac[d]
            if f > 0.0:
                v = f * total - sent[d]
                if v > best_v + 1e-12:
                    best, best_v = d, v
        return best

    # ------------------------------------------------------------------ stepping
    def step(self, dt: float | None = None) -> list[ExitEvent]:
        """Advance the network by one timestep and return the discharges."""
        if dt is not None and abs(dt - self.dt) > 1e-12:
            raise ArgumentError(f"dt ({dt}) must equal the configured timestep ({self.dt})")
        t_next = self.t + self.dt
        sat_dt = self._sat * self.dt
        credit = self._credit
        events = self.events
        moves: list[tuple] = []
        pending: dict[int, int] = {}
        out: list[ExitEvent] = []

        for pos, node in enumerate(self._nodes):
            sig = self._signals[node.id]
            if sig.green_steps is None:
                raise SimulationError(f"intersection {node.id} has no active plan at t={self.t}")
            if sig.all_red:
                continue
            sec = node.approaches[sig.phase]
            c = credit[sec.index] + sat_dt
            allowed = int(c + _EPS)
            done = 0
            q = sec.queue
            while done < allowed and q:
                v = q[0]
                if v.entry_time + v.ideal_travel_time > t_next + _EPS:
                    break
                d = self._route(pos, node, sec.direction)
                target = node.outlets[d]
                if target is not None and len(target.queue) + pending.get(target.index, 0) >= target.capacity:
                    break
                q.popleft()
                self._sent[pos][sec.direction][d] += 1
                sec.cumulative_exited += 1
                v.exit_time = t_next
                delay = (t_next - v.entry_time - v.ideal_travel_time) / sec.length
                if delay < 0.0:
                    delay = 0.0 if delay > -_EPS else delay
                    if delay < 0.0:
                        raise SimulationError(f"negative delay for vehicle {v.id} on {sec.id}")
                times, values = self.exit_log[node.id]
                times.append(t_next)
                values.append(delay)
                self._win_delay[pos] += delay
                self._win_count[pos] += 1
                if target is None:
                    self.exited += 1
                else:
                    moves.append((target, v.id))
                    pending[target.index] = pending.get(target.index, 0) + 1
                if events is not None:
                    events.append(f"{t_next:.3f},dis,{sec.id},{v.id},{target.id if target else 'exit'}")
                out.append(ExitEvent(t_next, node.id, sec.direction, v.id, delay, target.id if target else None))
                done += 1
            c -= done
            if done < allowed:
                c -= allowed - done
            credit[sec.index] = c

        for target, vid in moves:
            target.queue.append(VehicleRecord(vid, t_next, target.ideal_travel_time))
            target.cumulative_entered += 1

        t_now = self.t
        for entry in self._boundary:
            sec, times, ptr, virtual = entry
            n = len(times)
            while ptr < n and times[ptr] < t_next:
                virtual.append(times[ptr])
                ptr += 1
            entry[2] = ptr
            q = sec.queue
            while virtual and len(q) < sec.capacity:
                a = virtual.popleft()
                entry_time = a if a >= t_now else t_next
                vid = self._next_id
                self._next_id += 1
                q.append(VehicleRecord(vid, entry_time, sec.ideal_travel_time))
                sec.cumulative_entered += 1
                self.entered += 1
                if events is not None:
                    events.append(f"{entry_time:.6f},arr,{sec.id},{vid},")

        self.t = t_next
        self._win_steps += 1
        for pos, node in enumerate(self._nodes):
            veh = 0
            for s in node.approaches:
                veh += len(s.queue)
            self._win_density[pos] += veh / self._total_len[pos]
            sig = self._signals[node.id]
            sig.steps_left -= 1
            if sig.steps_left < 0:
                raise SimulationError(f"signal timer underflow at {node.id}")
            self._settle(node, sig)
        return out

    # ------------------------------------------------------------------ metrics
    def in_system(self) -> int:
        return sum(len(s.queue) for s in self.topology.sections)

    def virtual_queue(self) -> int:
        return sum(len(e[3]) for e in self._boundary)

    def check_conservation(self) -> None:
        if self.entered != self.in_system() + self.exited:
            raise SimulationError(
                f"conservation broken: entered={self.entered} in_system={self.in_system()} exited={self.exited}"
            )
        for s in self.topology.sections:
            if s.cumulative_entered != len(s.queue) + s.cumulative_exited:
                raise SimulationError(f"conservation broken on section {s.id}")

    def measure_delay(self, node_id: str, window: float) -> DelayReading:
        """Mean excess travel time per km of vehicles that left ``node_id``'s
        approaches during the last ``window`` seconds."""
        if not window > 0:
            raise ArgumentError(f"window must be > 0, got {window}")
        times, values = self.exit_log[node_id]
        lo = bisect_right(times, self.t - window + _EPS)
        n = len(times) - lo
        if n == 0:
            return DelayReading(0.0, 0)
        return DelayReading(math.fsum(values[lo:]) / n, n)

    def sample_window(self) -> MetricsSample:
        """Close the current sampling window and return its averages."""
        steps = max(self._win_steps, 1)
        per_delay: dict[str, float] = {}
        per_density: dict[str, float] = {}
        delays = []
        for pos, node in enumerate(self._nodes):
            cnt = self._win_count[pos]
            d = self._win_delay[pos] / cnt if cnt else 0.0
            per_delay[node.id] = d
            if cnt:
                delays.append(d)
            per_density[node.id] = self._win_density[pos] / steps
        sample = MetricsSample(
            t=self.t,
            avg_delay=sum(delays) / len(delays) if delays else 0.0,
            avg_density=sum(per_density.values()) / len(per_density),
            per_intersection_delay=per_delay,
            per_intersection_density=per_density,
        )
        self._win_delay = [0.0] * len(self._nodes)
        self._win_count = [0] * len(self._nodes)
        self._win_density = [0.0] * len(self._nodes)
        self._win_steps = 0
        return sample

    def arrival_digest(self) -> str:
        return schedule_digest(self._schedules)

    def event_digest(self) -> str:
        if self.events is None:
            raise ArgumentError("simulator was created without record_events=True")
        return hashlib.sha256("\n".join(self.events).encode()).hexdigest()

    def node_density(self, node_id: str) -> np.ndarray:
        return measure_density(self.topology.intersections[node_id])


Controller = Callable[[Simulator, str], Sequence[float]]


def run_cycle(
    sim: Simulator,
    node_id: str,
    plan: Sequence[float],
    controllers: Mapping[str, Controller] | None = None,
    on_step: Callable[[Simulator], None] | None = None,
) -> CycleResult:
    """Run one full signal cycle of ``plan`` at ``node_id``.

    The whole network is stepped each timestep. Other intersections whose
    cycle ends meanwhile get their next plan from ``controllers`` (default:
    repeat their previous plan).
    """
    node = sim.topology.intersections[node_id]
    before = measure_density(node)
    exited_before = np.array([s.cumulative_exited for s in node.approaches])
    start = sim.t
    last_plans = {nid: n.active_plan for nid, n in sim.topology.intersections.items()}
    sim.set_plan(node_id, plan)
    while True:
        sim.step()
        if on_step is not None:
            on_step(sim)
        finished = sim.needs_plan(node_id)
        for nid, other in sim.topology.intersections.items():
            if nid == node_id:
                continue
            if sim.needs_plan(nid):
                if controllers and nid in controllers:
                    sim.set_plan(nid, controllers[nid](sim, nid))
                elif last_plans.get(nid) is not None:
                    sim.set_plan(nid, last_plans[nid])
                else:
                    raise SimulationError(f"no controller for intersection {nid}")
            last_plans[nid] = other.active_plan or last_plans.get(nid)
        if finished:
            break
    return CycleResult(
        node=node_id,
        plan=tuple(float(g) for g in plan),
        start=start,
        duration=sim.t - start,
        density_before=before,
        density_after=measure_density(node),
        discharged=np.array([s.cumulative_exited for s in node.approaches]) - exited_before,
    )


def cycle_length(plan: Sequence[float], intergreen: float = 0.0) -> float:
    return float(sum(plan)) + 4 * intergreen


def metrics_header(node_ids: Sequence[str]) -> list[str]:
    cols = ["t_sec", "avg_delay_s_per_km", "avg_density_veh_per_km"]
    for nid in node_ids:
        cols += [f"delay_{nid}", f"density_{nid}"]
    return cols


def metrics_row(sample: MetricsSample, node_ids: Sequence[str]) -> list[str]:
    row = [f"{sample.t:.1f}", f"{sample.avg_delay:.6f}", f"{sample.avg_density:.6f}"]
    for nid in node_ids:
        row += [f"{sample.per_intersection_delay[nid]:.6f}", f"{sample.per_intersection_density[nid]:.6f}"]
    return row


__all__ = [
    "DIRECTIONS",
    "CycleResult",
    "DelayReading",
    "ExitEvent",
    "MetricsSample",
    "Simulator",
    "cycle_length",
    "measure_density",
    "metrics_header",
    "metrics_row",
    "run_cycle",
]
