"""Road network types and scenario construction.

A scenario is a nested mapping (usually loaded from YAML) describing
intersections, their neighbours, per-approach section geometry, boundary
demand and turning fractions. :func:`build_network` validates it and returns
a fresh :class:`NetworkTopology` whose sections carry mutable queue state.
"""

from __future__ import annotations

import copy
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from trafficrl.errors import ConfigError

DIRECTIONS = ("upper", "right", "lower", "left")
OPPOSITE = {0: 2, 1: 3, 2: 0, 3: 1}

ARRIVAL_KINDS = ("weibull", "deterministic", "none")


@dataclass
class SimConfig:
    timestep: float = 1.0
    saturation_flow: float = 0.5
    intergreen: float = 0.0
    episode_duration: float = 3600.0
    rng_seed: int = 0
    jam_density: float = 200.0

    def __post_init__(self) -> None:
        if self.timestep <= 0:
            raise ConfigError(f"sim.timestep must be > 0, got {self.timestep}")
        if self.saturation_flow <= 0:
            raise ConfigError(f"sim.saturation_flow must be > 0, got {self.saturation_flow}")
        if self.intergreen < 0:
            raise ConfigError(f"sim.intergreen must be >= 0, got {self.intergreen}")
        if self.jam_density <= 0:
            raise ConfigError(f"sim.jam_density must be > 0, got {self.jam_density}")
        steps = self.episode_duration / self.timestep
        if self.episode_duration <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ConfigError(
                f"sim.episode_duration ({self.episode_duration}) must be a positive "
                f"multiple of timestep ({self.timestep})"
            )
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigError("sim.rng_seed must fit in 64 bits")

    def to_dict(self) -> dict[str, Any]:
        return {
            "timestep": self.timestep,
            "saturation_flow": self.saturation_flow,
            "intergreen": self.intergreen,
            "episode_duration": self.episode_duration,
            "rng_seed": self.rng_seed,
            "jam_density": self.jam_density,
        }


@dataclass(slots=True)
class VehicleRecord:
    id: int
    entry_time: float
    ideal_travel_time: float
    exit_time: float | None = None


@dataclass(eq=False)
class RoadSection:
    id: str
    length: float
    free_flow_speed: float
    arrival_kind: str = "none"
    arrival_shape: float = 2.0
    arrival_scale: float = 0.0
    queue: deque = field(default_factory=deque, repr=False)
    cumulative_entered: int = 0
    cumulative_exited: int = 0
    node: str = ""
    direction: int = 0
    upstream: str | None = None
    capacity: int = 0
    index: int = 0

    @property
    def ideal_travel_time(self) -> float:
        return self.length / self.free_flow_speed * 3600.0

    @property
    def is_boundary(self) -> bool:
        return self.upstream is None


@dataclass(eq=False)
class IntersectionNode:
    id: str
    approaches: list[RoadSection]
    turn_matrix: np.ndarray
    outlets: list[RoadSection | None]
    current_phase: int = 0
    active_plan: tuple[float, ...] | None = None

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.approaches])


@dataclass
class NetworkTopology:
    name: str
    intersections: dict[str, IntersectionNode]
    neighbor_map: dict[str, list[str]]
    boundary_sections: list[RoadSection]
    sections: list[RoadSection]
    sim: SimConfig

    @property
    def ids(self) -> list[str]:
        return list(self.intersections)


def _positive(value: Any, what: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{what} must be a number, got {value!r}") from None
    if not x > 0 or not math.isfinite(x):
        raise ConfigError(f"{what} must be > 0, got {value!r}")
    return x


def _direction(value: Any, where: str) -> int:
    if isinstance(value, int) and 0 <= value < 4:
        return value
    if isinstance(value, str) and value.lower() in DIRECTIONS:
        return DIRECTIONS.index(value.lower())
    raise ConfigError(f"{where}: unknown direction {value!r}, expected one of {DIRECTIONS}")


def default_turns(through: float | None = None) -> list[list[float]]:
    """Turning fractions with no U-turns.

    With ``through=None`` every non-origin direction gets 1/3. Otherwise the
    straight-ahead movement gets ``through`` and the two turns share the rest.
    """
    rows = []
    for a in range(4):
        row = [0.0] * 4
        for b in range(4):
            if b == a:
                continue
            if through is None:
                row[b] = 1.0 / 3.0
            elif b == OPPOSITE[a]:
                row[b] = through
            else:
                row[b] = (1.0 - through) / 2.0
        rows.append(row)
    return rows


def load_scenario(source: str | Path | Mapping[str, Any]) -> dict[str, Any]:
    """Resolve a scenario reference: built-in name, YAML path or mapping."""
    if isinstance(source, Mapping):
        return copy.deepcopy(dict(source))
    text = str(source)
    if text in BUILTIN_SCENARIOS:
        return builtin_scenario(text)
    path = Path(text)
    if not path.exists():
        raise ConfigError(f"scenario {text!r} is neither a built-in name nor an existing file")
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, dict):
        raise ConfigError(f"scenario file {path} does not contain a mapping")
    return data


def build_network(
    scenario: str | Path | Mapping[str, Any],
    subset: list[str] | None = None,
    seed: int | None = None,
) -> NetworkTopology:
    """Validate a scenario description and build a fresh topology.

    ``subset`` keeps only the listed intersections; links to dropped
    intersections become boundary sections fed by that side's configured
    demand. ``seed`` overrides ``sim.rng_seed``.
    """
    cfg = load_scenario(scenario)
    name = str(cfg.get("name", "scenario"))
    sim_cfg = dict(cfg.get("sim") or {})
    if seed is not None:
        sim_cfg["rng_seed"] = int(seed)
    try:
        sim = SimConfig(**sim_cfg)
    except TypeError as exc:
        raise ConfigError(f"sim: {exc}") from None

    defaults = dict(cfg.get("defaults") or {})
    raw_nodes = cfg.get("intersections")
    if not raw_nodes:
        raise ConfigError("scenario must name at least one intersection")

    ids: list[str] = []
    for i, raw in enumerate(raw_nodes):
        if "id" not in raw:
            raise ConfigError(f"intersections[{i}] is missing 'id'")
        nid = str(raw["id"])
        if nid in ids:
            raise ConfigError(f"duplicate intersection id {nid!r}")
        ids.append(nid)
    if subset is not None:
        unknown = [s for s in subset if s not in ids]
        if unknown:
            raise ConfigError(f"subset names unknown intersections {unknown}")
        keep = set(subset)
        raw_nodes = [r for r in raw_nodes if str(r["id"]) in keep]
        ids = [str(r["id"]) for r in raw_nodes]

    # neighbour links: side of each node that a neighbour attaches to
    links: dict[str, dict[int, str]] = {}
    neighbor_map: dict[str, list[str]] = {}
    all_ids = {str(r["id"]) for r in cfg["intersections"]}
    for raw in raw_nodes:
        nid = str(raw["id"])
        links[nid] = {}
        neighbor_map[nid] = []
        for j, nb in enumerate(raw.get("neighbors") or []):
            where = f"intersection {nid} neighbors[{j}]"
            if not isinstance(nb, Mapping) or "id" not in nb or "direction" not in nb:
                raise ConfigError(f"{where}: expected mapping with 'id' and 'direction'")
            other = str(nb["id"])
            if other not in all_ids:
                raise ConfigError(f"{where}: references undefined intersection {other!r}")
            if other == nid:
                raise ConfigError(f"{where}: intersection cannot neighbour itself")
            d = _direction(nb["direction"], where)
            if d in links[nid]:
                raise ConfigError(f"{where}: direction {DIRECTIONS[d]} used twice")
            if other in neighbor_map[nid]:
                raise ConfigError(f"{where}: neighbour {other!r} listed twice")
            if subset is not None and other not in ids:
                continue
            links[nid][d] = other
            neighbor_map[nid].append(other)
    for a, nbs in neighbor_map.items():
        for b in nbs:
            if a not in neighbor_map.get(b, []):
                raise ConfigError(f"asymmetric adjacency: {a} lists {b} but {b} does not list {a}")

    raw_by_id = {str(r["id"]): r for r in raw_nodes}

    def section_spec(nid: str, d: int) -> dict[str, Any]:
        per = raw_by_id[nid].get("sections") or {}
        spec = dict(defaults)
        for key in (DIRECTIONS[d], d):
            if key in per:
                if not isinstance(per[key], Mapping):
                    raise ConfigError(f"intersection {nid} section {DIRECTIONS[d]} must be a mapping")
                spec.update(per[key])
        return spec

    sections: list[RoadSection] = []
    approaches: dict[str, list[RoadSection]] = {}
    for nid in ids:
        approaches[nid] = []
        for d in range(4):
            spec = section_spec(nid, d)
            where = f"intersection {nid} section {DIRECTIONS[d]}"
            length = _positive(spec.get("length_km", 0.5), f"{where} length_km")
            speed = _positive(spec.get("free_flow_speed", 50.0), f"{where} free_flow_speed")
            upstream = links[nid].get(d)
            kind = str(spec.get("arrivals", "none" if "scale" not in spec else "weibull"))
            if kind not in ARRIVAL_KINDS:
                raise ConfigError(f"{where}: arrivals must be one of {ARRIVAL_KINDS}, got {kind!r}")
            shape = float(spec.get("shape", spec.get("weibull_shape", 2.0)))
            scale = float(spec.get("scale", 0.0))
            if upstream is not None:
                kind = "none"
            elif kind != "none":
                _positive(shape, f"{where} shape")
                _positive(scale, f"{where} scale")
            sec = RoadSection(
                id=f"{nid}.{DIRECTIONS[d]}",
                length=length,
                free_flow_speed=speed,
                arrival_kind=kind,
                arrival_shape=shape,
                arrival_scale=scale,
                node=nid,
                direction=d,
                upstream=upstream,
                capacity=max(1, int(math.floor(sim.jam_density * length + 1e-9))),
                index=len(sections),
            )
            sections.append(sec)
            approaches[nid].append(sec)

    nodes: dict[str, IntersectionNode] = {}
    for nid in ids:
        raw = raw_by_id[nid]
        turns = raw.get("turns", cfg.get("turns"))
        if turns is None:
            turns = default_turns()
        elif isinstance(turns, Mapping) and "through" in turns:
            turns = default_turns(float(turns["through"]))
        tm = np.asarray(turns, dtype=float)
        if tm.shape != (4, 4):
            raise ConfigError(f"intersection {nid}: turn matrix must be 4x4, got shape {tm.shape}")
        if np.any(tm < 0) or not np.all(np.isfinite(tm)):
            raise ConfigError(f"intersection {nid}: turn fractions must be finite and >= 0")
        for r in range(4):
            if abs(tm[r].sum() - 1.0) > 1e-9:
                raise ConfigError(
                    f"intersection {nid}: turn matrix row {r} ({DIRECTIONS[r]}) sums to "
                    f"{tm[r].sum():.12g}, expected 1"
                )
        outlets: list[RoadSection | None] = []
        for d in range(4):
            other = links[nid].get(d)
            if other is None:
                outlets.append(None)
            else:
                back = next(k for k, v in links[other].items() if v == nid)
                outlets.append(approaches[other][back])
        nodes[nid] = IntersectionNode(id=nid, approaches=approaches[nid], turn_matrix=tm, outlets=outlets)

    boundary = [s for s in sections if s.is_boundary]
    return NetworkTopology(
        name=name,
        intersections=nodes,
        neighbor_map=neighbor_map,
        boundary_sections=boundary,
        sections=sections,
        sim=sim,
    )


def demand_scale(rate_veh_per_s: float, shape: float = 2.0) -> float:
    """Weibull scale giving a mean headway of ``1 / rate``."""
    return 1.0 / (rate_veh_per_s * math.gamma(1.0 + 1.0 / shape))


def _sections_with_rates(rates: Mapping[str, float], kind: str = "weibull", shape: float = 2.0) -> dict:
    out = {}
    for side, rate in rates.items():
        if rate > 0:
            out[side] = {"arrivals": kind, "shape": shape, "scale": round(demand_scale(rate, shape), 6)}
        else:
            out[side] = {"arrivals": "none"}
    return out


_SIM_DEFAULTS = {
    "timestep": 1.0,
    "saturation_flow": 0.5,
    "intergreen": 0.0,
    "episode_duration": 3600.0,
    "rng_seed": 0,
    "jam_density": 200.0,
}
_SECTION_DEFAULTS = {"length_km": 0.5, "free_flow_speed": 50.0, "weibull_shape": 2.0}


def _single(rates: Mapping[str, float], kind: str = "weibull", name: str = "single") -> dict:
    return {
        "name": name,
        "sim": dict(_SIM_DEFAULTS),
        "defaults": dict(_SECTION_DEFAULTS),
        "intersections": [{"id": "X", "neighbors": [], "sections": _sections_with_rates(rates, kind)}],
    }


def _bengaluru6() -> dict:
    side = 0.05
    nodes = {
        "A": [("D", "right")],
        "B": [("C", "right")],
        "C": [("D", "upper"), ("B", "left"), ("E", "right")],
        "D": [("A", "left"), ("E", "right"), ("C", "lower")],
        "E": [("C", "left"), ("D", "upper"), ("F", "right")],
        "F": [("E", "left")],
    }
    out = []
    for nid, nbs in nodes.items():
        out.append({
            "id": nid,
            "neighbors": [{"id": o, "direction": d} for o, d in nbs],
            "sections": _sections_with_rates({d: side for d in DIRECTIONS}),
        })
    return {
        "name": "bengaluru6",
        "sim": dict(_SIM_DEFAULTS),
        "defaults": dict(_SECTION_DEFAULTS),
        "intersections": out,
    }


def _corridor4() -> dict:
    ids = ["A", "B", "C", "D"]
    out = []
    for i, nid in enumerate(ids):
        nbs = []
        if i > 0:
            nbs.append({"id": ids[i - 1], "direction": "left"})
        if i < len(ids) - 1:
            nbs.append({"id": ids[i + 1], "direction": "right"})
        rates = {"upper": 0.04, "lower": 0.04, "left": 0.12, "right": 0.12}
        out.append({
            "id": nid,
            "neighbors": nbs,
            "sections": _sections_with_rates(rates),
            "turns": {"through": 0.8},
        })
    return {
        "name": "corridor4",
        "sim": dict(_SIM_DEFAULTS),
        "defaults": dict(_SECTION_DEFAULTS),
        "intersections": out,
    }


BUILTIN_SCENARIOS = {
    "single": lambda: _single({d: 0.06 for d in DIRECTIONS}),
    "single-asym": lambda: _single(
        {"upper": 0.18, "right": 0.06, "lower": 0.06, "left": 0.06}, name="single-asym"
    ),
    "single-asym-det": lambda: _single(
        {"upper": 0.18, "right": 0.06, "lower": 0.06, "left": 0.06},
        kind="deterministic",
        name="single-asym-det",
    ),
    "bengaluru6": _bengaluru6,
    "corridor4": _corridor4,
}


def builtin_scenario(name: str) -> dict[str, Any]:
    try:
        return BUILTIN_SCENARIOS[name]()
    except KeyError:
        raise ConfigError(f"unknown built-in scenario {name!r}; known: {sorted(BUILTIN_SCENARIOS)}") from None


def dump_scenario(cfg: Mapping[str, Any]) -> str:
    return yaml.safe_dump(dict(cfg), sort_keys=False)
