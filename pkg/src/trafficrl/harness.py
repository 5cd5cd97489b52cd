"""Paired controller comparisons: episodes, experiments and summaries."""

from __future__ import annotations

import csv
import json
import math
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from trafficrl.a3c.env import SignalEnv
from trafficrl.a3c.policy import PolicyController
from trafficrl.baselines import FstController
from trafficrl.errors import ConfigError, FormatError
from trafficrl.nn import checkpoint
from trafficrl.sim.network import build_network, load_scenario
from trafficrl.sim.simulator import MetricsSample, metrics_header, metrics_row

DEFAULT_WINDOW = 90.0
RUN_FILE = re.compile(r"^(?P<label>.+)__seed(?P<seed>-?\d+)\.csv$")


@dataclass
class EpisodeResult:
    label: str
    seed: int
    node_ids: list[str]
    samples: list[MetricsSample]
    arrival_digest: str
    plans: int
    violations: list[str]
    event_digest: str | None = None

    @property
    def mean_delay(self) -> float:
        return statistics.fmean(s.avg_delay for s in self.samples)

    @property
    def mean_density(self) -> float:
        return statistics.fmean(s.avg_density for s in self.samples)

    def csv_rows(self) -> list[list[str]]:
        return [metrics_header(self.node_ids)] + [metrics_row(s, self.node_ids) for s in self.samples]


def run_episode(
    scenario,
    controller,
    seed: int,
    window: float = DEFAULT_WINDOW,
    subset: Sequence[str] | None = None,
    episode_duration: float | None = None,
    label: str | None = None,
    record_events: bool = False,
) -> EpisodeResult:
    """Run one evaluation episode with demand drawn from ``seed``.

    Arrival times depend only on the scenario and seed, so every controller
    run on the same seed faces the same vehicles.
    """
    rl = getattr(controller, "rl", False)
    env = SignalEnv(
        scenario,
        observation=getattr(controller, "variant", "single") if rl else "single",
        seed=seed,
        fixed_seed=True,
        window=window,
        episode_duration=episode_duration,
        subset=subset,
        check_actions=rl,
        record_events=record_events,
    )
    controller.reset()
    decisions = env.reset()
    while not (decisions and decisions[0].done):
        decisions = env.advance({d.node: controller.plan(d) for d in decisions})
    sim = env.sim
    sim.check_conservation()
    return EpisodeResult(
        label=label or getattr(controller, "label", "controller"),
        seed=seed,
        node_ids=env.node_ids,
        samples=env.samples,
        arrival_digest=sim.arrival_digest(),
        plans=env.plans_checked,
        violations=list(env.plan_violations),
        event_digest=sim.event_digest() if record_events else None,
    )


def write_rows(path: Path, rows: list[list[str]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    return path


# ---------------------------------------------------------------- experiments
@dataclass
class RunSpec:
    label: str
    controller: str  # "fst" or "checkpoint"
    period: float | None = None
    checkpoint: str | None = None
    checkpoints: dict[str, str] | None = None
    greedy: bool = True


@dataclass
class ExperimentSpec:
    scenario: Any
    runs: list[RunSpec]
    seeds: list[int]
    window: float = DEFAULT_WINDOW
    reference: str | None = None
    subset: list[str] | None = None
    episode_duration: float | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: Path | None = None) -> "ExperimentSpec":
        if "scenario" not in data or "runs" not in data:
            raise ConfigError("experiment spec needs 'scenario' and 'runs'")
        runs = []
        for i, r in enumerate(data["runs"]):
            r = dict(r)
            kind = str(r.get("controller", "fst")).lower()
            if kind not in ("fst", "checkpoint"):
                raise ConfigError(f"runs[{i}]: controller must be 'fst' or 'checkpoint'")
            label = str(r.get("label") or (f"FST{float(r.get('period', 0)):g}" if kind == "fst" else f"RL{i}"))
            if "__" in label:
                raise ConfigError(f"runs[{i}]: label {label!r} must not contain '__'")
            runs.append(RunSpec(label, kind, r.get("period"), r.get("checkpoint"), r.get("checkpoints"),
                                bool(r.get("greedy", True))))
        labels = [r.label for r in runs]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate run labels in {labels}")
        seeds = [int(s) for s in data.get("seeds", [0])]
        if not seeds:
            raise ConfigError("experiment needs at least one seed")
        return cls(
            scenario=data["scenario"],
            runs=runs,
            seeds=seeds,
            window=float(data.get("window", DEFAULT_WINDOW)),
            reference=data.get("reference"),
            subset=data.get("subset"),
            episode_duration=data.get("episode_duration"),
            base_dir=base_dir or Path.cwd(),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        path = Path(path)
        data = yaml.safe_load(path.read_text())
        if not isinstance(data, dict):
            raise ConfigError(f"experiment spec {path} must be a mapping")
        return cls.from_mapping(data, base_dir=path.parent)

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q


def _controller(spec: ExperimentSpec, run: RunSpec):
    if run.controller == "fst":
        if run.period is None:
            raise ConfigError(f"run {run.label}: FST run needs 'period'")
        return FstController(float(run.period))
    if run.checkpoints:
        nets = {node: checkpoint.load(spec.resolve(p)) for node, p in run.checkpoints.items()}
    else:
        nets = checkpoint.load(spec.resolve(run.checkpoint))
    return PolicyController(nets, greedy=run.greedy, label=run.label)


def validate_experiment(spec: ExperimentSpec) -> dict[str, Any]:
    """Resolve everything up front so a bad path fails before any run starts."""
    scenario = load_scenario(spec.scenario if not isinstance(spec.scenario, str)
                             or not spec.resolve(spec.scenario).exists() else spec.resolve(spec.scenario))
    build_network(scenario, subset=spec.subset)
    for run in spec.runs:
        if run.controller == "checkpoint":
            paths = list((run.checkpoints or {}).values()) or ([run.checkpoint] if run.checkpoint else [])
            if not paths:
                raise ConfigError(f"run {run.label}: needs 'checkpoint' or 'checkpoints'")
            for p in paths:
                if not spec.resolve(p).exists():
                    raise ConfigError(f"run {run.label}: checkpoint {p} not found")
        elif run.period is None or not float(run.period) > 0:
            raise ConfigError(f"run {run.label}: FST run needs a positive 'period'")
    if spec.reference is not None and spec.reference not in [r.label for r in spec.runs]:
        raise ConfigError(f"reference {spec.reference!r} is not one of the runs")
    return scenario


def run_experiment(spec: ExperimentSpec, out_dir: str | Path) -> dict[str, Any]:
    """Execute every (run, seed) pair on common random numbers and write
    per-run CSVs, ``summary.csv`` and ``manifest.json``."""
    scenario = validate_experiment(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digests: dict[str, dict[int, str]] = {}
    violations: list[str] = []
    plans = 0
    for run in spec.runs:
        controller = _controller(spec, run)
        digests[run.label] = {}
        for seed in spec.seeds:
            res = run_episode(scenario, controller, seed, spec.window, spec.subset, spec.episode_duration, run.label)
            write_rows(out / f"{run.label}__seed{seed}.csv", res.csv_rows())
            digests[run.label][seed] = res.arrival_digest
            violations += res.violations
            plans += res.plans if getattr(controller, "rl", False) else 0
    paired = all(len({digests[r.label][s] for r in spec.runs}) == 1 for s in spec.seeds)
    reference = spec.reference or spec.runs[0].label
    rows = summarize(out, reference)
    write_summary(out / "summary.csv", rows)
    manifest = {
        "scenario": scenario,
        "runs": [vars(r) for r in spec.runs],
        "seeds": spec.seeds,
        "window": spec.window,
        "subset": spec.subset,
        "episode_duration": spec.episode_duration,
        "reference": reference,
        "arrival_digests": digests,
        "paired_arrivals": paired,
        "rl_plans_checked": plans,
        "plan_violations": violations,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return manifest


# ---------------------------------------------------------------- summaries
@dataclass
class SummaryRow:
    label: str
    seeds: int
    delay_mean: float
    delay_sd: float
    density_mean: float
    density_sd: float
    delay_change_pct: float
    density_change_pct: float


SUMMARY_HEADER = [
    "controller", "seeds", "delay_mean", "delay_sd", "density_mean", "density_sd",
    "delay_change_pct", "density_change_pct",
]


def time_average(path: str | Path) -> tuple[float, float, list[str]]:
    """Mean of the network delay and density columns of one metrics CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path} is empty")
    header = rows[0]
    if header[:3] != ["t_sec", "avg_delay_s_per_km", "avg_density_veh_per_km"]:
        raise FormatError(f"{path} does not have the metrics CSV header")
    body = rows[1:]
    if not body:
        raise FormatError(f"{path} has no samples")
    try:
        delay = statistics.fmean(float(r[1]) for r in body)
        density = statistics.fmean(float(r[2]) for r in body)
    except (ValueError, IndexError):
        raise FormatError(f"{path} has malformed rows") from None
    return delay, density, header


def percent_change(reference: float, value: float) -> float:
    """Reduction relative to ``reference`` in percent (positive = better)."""
    if reference == 0:
        return 0.0 if value == 0 else -math.inf
    return (reference - value) / reference * 100.0


def _sd(xs: list[float]) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def summarize(source: str | Path | Mapping[str, Sequence[str | Path]], reference: str) -> list[SummaryRow]:
    """Aggregate per-seed time averages into one row per controller."""
    if isinstance(source, Mapping):
        groups = {label: [Path(p) for p in paths] for label, paths in source.items()}
    else:
        groups = {}
        for p in sorted(Path(source).glob("*.csv")):
            m = RUN_FILE.match(p.name)
            if m:
                groups.setdefault(m["label"], []).append(p)
    if not groups:
        raise FormatError(f"no run CSVs found in {source}")
    ref_key = reference
    if ref_key not in groups:
        raise FormatError(f"reference {reference!r} not among runs {sorted(groups)}")
    stats: dict[str, tuple[list[float], list[float]]] = {}
    header0 = None
    for label, paths in groups.items():
        delays, densities = [], []
        for p in paths:
            d, k, header = time_average(p)
            if header0 is None:
                header0 = header
            elif header != header0:
                raise FormatError(f"{p} has columns {header}, expected {header0}")
            delays.append(d)
            densities.append(k)
        stats[label] = (delays, densities)
    ref_delay = statistics.fmean(stats[ref_key][0])
    ref_density = statistics.fmean(stats[ref_key][1])
    rows = []
    order = [ref_key] + sorted(k for k in stats if k != ref_key)
    for label in order:
        delays, densities = stats[label]
        dm, km = statistics.fmean(delays), statistics.fmean(densities)
        rows.append(SummaryRow(
            label, len(delays), dm, _sd(delays), km, _sd(densities),
            0.0 if label == ref_key else percent_change(ref_delay, dm),
            0.0 if label == ref_key else percent_change(ref_density, km),
        ))
    return rows


def write_summary(path: str | Path, rows: Sequence[SummaryRow]) -> Path:
    out = [SUMMARY_HEADER]
    for r in rows:
        out.append([r.label, str(r.seeds), f"{r.delay_mean:.6f}", f"{r.delay_sd:.6f}", f"{r.density_mean:.6f}",
                    f"{r.density_sd:.6f}", f"{r.delay_change_pct:.4f}", f"{r.density_change_pct:.4f}"])
    return write_rows(Path(path), out)


# ---------------------------------------------------------------- evaluation
def evaluate(
    nets,
    scenario,
    episodes: int = 5,
    seed: int = 1,
    window: float = DEFAULT_WINDOW,
    subset: Sequence[str] | None = None,
    episode_duration: float | None = None,
    greedy: bool = True,
) -> list[EpisodeResult]:
    controller = PolicyController(nets, greedy=greedy)
    return [
        run_episode(scenario, controller, seed + k, window, subset, episode_duration)
        for k in range(episodes)
    ]


def run_baseline(
    period: float,
    scenario,
    seeds: Sequence[int],
    window: float = DEFAULT_WINDOW,
    subset: Sequence[str] | None = None,
    episode_duration: float | None = None,
) -> list[EpisodeResult]:
    ctl = FstController(float(period))
    return [run_episode(scenario, ctl, s, window, subset, episode_duration) for s in seeds]


@dataclass
class PlanSearchResult:
    best_plan: tuple[int, ...]
    best_delay: float
    evaluated: int
    seconds: float
    ranking: list[tuple[float, tuple[int, ...]]]


def exhaustive_plan_search(
    scenario,
    seed: int = 0,
    window: float = DEFAULT_WINDOW,
    episode_duration: float | None = None,
    choices: Sequence[int] | None = None,
) -> PlanSearchResult:
    """Evaluate every fixed plan drawn from the action set for one episode.

    The plan with the lowest time-averaged delay is the oracle used to judge
    how close a trained agent gets on deterministic demand.
    """
    import itertools
    import time

    from trafficrl.a3c.actions import GREEN_CHOICES
    from trafficrl.baselines import FixedPlanController

    scenario = load_scenario(scenario)
    grid = list(choices or GREEN_CHOICES)
    started = time.time()
    ranking = []
    for plan in itertools.product(grid, repeat=4):
        res = run_episode(scenario, FixedPlanController(plan), seed, window, episode_duration=episode_duration)
        ranking.append((res.mean_delay, plan))
    ranking.sort()
    return PlanSearchResult(ranking[0][1], ranking[0][0], len(ranking), time.time() - started, ranking)
