"""Core operations behind each endpoint and CLI subcommand."""

from __future__ import annotations

import statistics
from pathlib import Path

from trafficrl.a3c.config import TrainConfig
from trafficrl.a3c.policy import PolicyController
from trafficrl.a3c.train import train as run_training
from trafficrl.baselines import parse_fst
from trafficrl.errors import ConfigError
from trafficrl.harness import (
    EpisodeResult,
    ExperimentSpec,
    SummaryRow,
    run_episode,
    run_experiment,
    summarize as summarize_runs,
    write_rows,
    write_summary,
)
from trafficrl.nn import checkpoint
from trafficrl.service import schemas as s


def _episodes(results: list[EpisodeResult]) -> list[s.EpisodeSummary]:
    return [s.EpisodeSummary(seed=r.seed, mean_delay=r.mean_delay, mean_density=r.mean_density,
                             samples=len(r.samples)) for r in results]


def _row(r: SummaryRow) -> s.SummaryRowModel:
    return s.SummaryRowModel(
        controller=r.label, seeds=r.seeds, delay_mean=r.delay_mean, delay_sd=r.delay_sd,
        density_mean=r.density_mean, density_sd=r.density_sd,
        delay_change_pct=r.delay_change_pct, density_change_pct=r.density_change_pct,
    )


def load_nets(ref: str | dict[str, str]):
    """A checkpoint file, a training output directory, or a node -> file map."""
    if isinstance(ref, dict):
        return {node: checkpoint.load(p) for node, p in ref.items()}
    path = Path(ref)
    if path.is_dir():
        if (path / "agent.ckpt").exists():
            return checkpoint.load(path / "agent.ckpt")
        per_node = sorted(path.glob("agent_*.ckpt"))
        if not per_node:
            raise ConfigError(f"no checkpoints found in {path}")
        return {p.stem[len("agent_"):]: checkpoint.load(p) for p in per_node}
    return checkpoint.load(path)


def train(req: s.TrainRequest) -> s.TrainResponse:
    overrides = {"regime": req.regime, "coordination": req.coordination, "seed": req.seed}
    if isinstance(req.config, dict):
        config = TrainConfig.from_mapping(req.config, **overrides)
    else:
        config = TrainConfig.load(req.config, **overrides)
    result = run_training(req.scenario, config, out_dir=req.out)
    m = result.manifest
    return s.TrainResponse(
        out=str(req.out),
        regime=config.regime,
        checkpoints={k: str(Path(req.out) / v) for k, v in m["checkpoints"].items()},
        store_updates=m["store_updates"],
        plans_checked=m["plans_checked"],
        plan_violations=m["plan_violations"],
        worker_errors={str(k): v for k, v in m["worker_errors"].items()},
        seconds=m["seconds"],
    )


def evaluate(req: s.EvaluateRequest) -> s.EvaluateResponse:
    controller = PolicyController(load_nets(req.checkpoint), greedy=req.greedy)
    results = [run_episode(req.scenario, controller, req.seed + k, req.window) for k in range(req.episodes)]
    if req.out:
        for r in results:
            write_rows(Path(req.out) / f"RL__seed{r.seed}.csv", r.csv_rows())
    return s.EvaluateResponse(
        episodes=_episodes(results),
        mean_delay=statistics.fmean(r.mean_delay for r in results),
        mean_density=statistics.fmean(r.mean_density for r in results),
        plan_violations=[v for r in results for v in r.violations],
    )


def baseline(req: s.BaselineRequest) -> s.BaselineResponse:
    controller = parse_fst(str(req.fst))
    results = [run_episode(req.scenario, controller, seed, req.window) for seed in req.seeds]
    files = []
    if req.out:
        for r in results:
            files.append(str(write_rows(Path(req.out) / f"{controller.label}__seed{r.seed}.csv", r.csv_rows())))
    return s.BaselineResponse(
        label=controller.label,
        episodes=_episodes(results),
        mean_delay=statistics.fmean(r.mean_delay for r in results),
        mean_density=statistics.fmean(r.mean_density for r in results),
        files=files,
    )


def experiment(req: s.ExperimentRequest) -> s.ExperimentResponse:
    if isinstance(req.spec, dict):
        spec = ExperimentSpec.from_mapping(req.spec)
    else:
        spec = ExperimentSpec.load(req.spec)
    manifest = run_experiment(spec, req.out)
    rows = summarize_runs(req.out, manifest["reference"])
    return s.ExperimentResponse(
        out=str(req.out),
        paired_arrivals=manifest["paired_arrivals"],
        plan_violations=manifest["plan_violations"],
        summary=[_row(r) for r in rows],
    )


def summarize(req: s.SummarizeRequest) -> s.SummarizeResponse:
    rows = summarize_runs(req.dir, req.reference)
    path = None
    if req.out is not None:
        path = str(write_summary(req.out, rows))
    return s.SummarizeResponse(path=path, rows=[_row(r) for r in rows])
