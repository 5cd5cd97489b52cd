"""Training regimes: single agent, independent agents (InRL), shared async."""

from __future__ import annotations

import csv
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from trafficrl.a3c.config import TrainConfig
from trafficrl.a3c.env import SignalEnv
from trafficrl.a3c.store import SharedParameterStore
from trafficrl.a3c.worker import AgentSlot, UpdateRecord, worker_loop
from trafficrl.encoding import matrix_row_order
from trafficrl.errors import ConfigError
from trafficrl.nn import checkpoint
from trafficrl.nn.network import PolicyValueNet
from trafficrl.sim.network import build_network, load_scenario
from trafficrl.sim.simulator import metrics_header

log = logging.getLogger(__name__)

LOSS_COLUMNS = ["policy_loss", "value_loss", "entropy", "mean_reward"]


@dataclass
class WorkerRun:
    worker_id: int
    env: Any
    slots: dict[str, AgentSlot]
    records: list[UpdateRecord] = field(default_factory=list)
    rows: list[list[str]] = field(default_factory=list)
    error: str | None = None


@dataclass
class TrainResult:
    regime: str
    nets: dict[str, PolicyValueNet]
    stores: dict[str, SharedParameterStore]
    workers: list[WorkerRun]
    manifest: dict[str, Any]
    checkpoints: list[Path] = field(default_factory=list)

    @property
    def records(self) -> list[UpdateRecord]:
        return [r for w in self.workers for r in w.records]

    @property
    def plan_violations(self) -> list[str]:
        return [v for w in self.workers for v in w.env.plan_violations]

    @property
    def plans_checked(self) -> int:
        return sum(w.env.plans_checked for w in self.workers)


def _new_net(config: TrainConfig, variant: str, seed: int) -> PolicyValueNet:
    return PolicyValueNet(variant, config.hidden, config.channels, config.kernel, config.shared_trunk, seed=seed)


def _env(scenario, config: TrainConfig, observation: str, seed: int, controlled=None) -> SignalEnv:
    return SignalEnv(
        scenario,
        controlled=controlled,
        observation=observation,
        aggregate=config.reward_aggregate,
        coordination=config.coordination,
        global_weight=config.global_weight,
        seed=seed,
        window=config.window,
        episode_duration=config.episode_duration,
        subset=config.subset,
        observe_neighbors=config.observe_neighbors,
    )


def _seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def build_regime(scenario, config: TrainConfig, env_factory=None):
    """Create stores, nets, environments and worker slots for ``config.regime``."""
    scenario = load_scenario(scenario)
    topo = build_network(scenario, subset=config.subset)
    ids = topo.ids
    if config.regime == "single" and len(ids) != 1:
        raise ConfigError(f"regime 'single' needs a one-intersection scenario, got {len(ids)} intersections")
    if config.regime in ("inrl", "shared_async") and len(ids) < 2:
        raise ConfigError(f"regime '{config.regime}' needs at least 2 intersections, got {len(ids)}")

    stores: dict[str, SharedParameterStore] = {}
    nets: dict[str, PolicyValueNet] = {}
    workers: list[WorkerRun] = []

    def store_for(net: PolicyValueNet) -> SharedParameterStore:
        return SharedParameterStore(net.get_params(), config.learning_rate, config.rms_decay, config.rms_eps)

    if config.regime == "single":
        seeds = _seeds(config.seed, 2)
        net = _new_net(config, "single", seeds[0])
        nets["agent"] = net
        stores["agent"] = store_for(net)
        env = env_factory(0) if env_factory else _env(scenario, config, "single", seeds[1])
        rng = np.random.default_rng(seeds[1])
        workers.append(WorkerRun(0, env, {ids[0]: AgentSlot(ids[0], net.clone(), stores["agent"], config, rng, 0)}))
    elif config.regime == "inrl":
        seeds = _seeds(config.seed, len(ids) + 1)
        env = env_factory(0) if env_factory else _env(scenario, config, "multi", seeds[-1])
        slots = {}
        for i, nid in enumerate(ids):
            net = _new_net(config, "multi", seeds[i])
            nets[nid] = net
            stores[nid] = store_for(net)
            rng = np.random.default_rng([seeds[-1], i])
            slots[nid] = AgentSlot(nid, net.clone(), stores[nid], config, rng, i)
        workers.append(WorkerRun(0, env, slots))
    else:
        n_workers = config.num_workers or len(ids)
        seeds = _seeds(config.seed, n_workers + 1)
        net = _new_net(config, "multi", seeds[-1])
        nets["agent"] = net
        stores["agent"] = store_for(net)
        for w in range(n_workers):
            own = ids[w % len(ids)]
            env = env_factory(w) if env_factory else _env(scenario, config, "multi", seeds[w])
            local = net.clone()
            slots = {}
            for j, nid in enumerate(ids):
                rng = np.random.default_rng([seeds[w], j])
                slots[nid] = AgentSlot(nid, local, stores["agent"] if nid == own else None, config, rng, w)
            workers.append(WorkerRun(w, env, slots))
    return topo, nets, stores, workers


def _record_row(run: WorkerRun, rec: UpdateRecord, node_ids: Sequence[str]) -> list[str]:
    samples = run.env.samples
    if samples:
        s = samples[-1]
        row = [f"{s.t:.1f}", f"{s.avg_delay:.6f}", f"{s.avg_density:.6f}"]
        for nid in node_ids:
            row += [f"{s.per_intersection_delay[nid]:.6f}", f"{s.per_intersection_density[nid]:.6f}"]
    else:
        row = [f"{rec.t_sec:.1f}", "0.000000", "0.000000"] + ["0.000000"] * (2 * len(node_ids))
    row += [f"{rec.policy_loss:.6f}", f"{rec.value_loss:.6f}", f"{rec.entropy:.6f}", f"{rec.mean_reward:.6f}"]
    row += [str(rec.worker_id), rec.node, str(rec.update_index)]
    return row


def _drive(run: WorkerRun, config: TrainConfig, node_ids: Sequence[str]):
    for rec in worker_loop(run.worker_id, run.env, run.slots, config):
        run.records.append(rec)
        run.rows.append(_record_row(run, rec, node_ids))
        yield rec


def run_workers(workers: list[WorkerRun], config: TrainConfig, node_ids: Sequence[str]) -> None:
    if len(workers) == 1 or config.async_mode == "round_robin":
        gens = {w.worker_id: (w, _drive(w, config, node_ids)) for w in workers}
        while gens:
            for wid in list(gens):
                run, gen = gens[wid]
                try:
                    next(gen)
                except StopIteration:
                    del gens[wid]
                except Exception as exc:  # env failure stops this worker only
                    log.exception("worker %d failed", wid)
                    run.error = repr(exc)
                    del gens[wid]
        return

    def target(run: WorkerRun) -> None:
        try:
            for _ in _drive(run, config, node_ids):
                pass
        except Exception as exc:
            log.exception("worker %d failed", run.worker_id)
            run.error = repr(exc)

    threads = [threading.Thread(target=target, args=(w,), name=f"a3c-worker-{w.worker_id}") for w in workers]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def train(
    scenario,
    config: TrainConfig,
    out_dir: str | Path | None = None,
    env_factory=None,
) -> TrainResult:
    """Train per ``config.regime`` and optionally write checkpoints,
    ``metrics.csv`` and ``manifest.json`` into ``out_dir``."""
    started = time.time()
    scenario_cfg = load_scenario(scenario)
    topo, nets, stores, workers = build_regime(scenario_cfg, config, env_factory)
    node_ids = workers[0].env.node_ids
    run_workers(workers, config, node_ids)
    for key, net in nets.items():
        net.set_params(stores[key].snapshot()[0])

    manifest = {
        "regime": config.regime,
        "coordination": "on" if config.coordination else "off",
        "config": config.to_dict(),
        "scenario": scenario_cfg,
        "intersections": node_ids,
        "row_order": {nid: matrix_row_order(nid, topo) for nid in topo.ids},
        "networks": {k: {**n.config(), "param_count": n.param_count()} for k, n in nets.items()},
        "workers": len(workers),
        "store_updates": {k: s.updates for k, s in stores.items()},
        "submitted_updates": {k: {str(w): c for w, c in s.submitted.items()} for k, s in stores.items()},
        "worker_errors": {w.worker_id: w.error for w in workers if w.error},
        "plans_checked": sum(w.env.plans_checked for w in workers),
        "plan_violations": [v for w in workers for v in w.env.plan_violations],
        "seconds": round(time.time() - started, 3),
    }
    result = TrainResult(config.regime, nets, stores, workers, manifest)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for key, net in nets.items():
            name = "agent.ckpt" if key == "agent" else f"agent_{key}.ckpt"
            result.checkpoints.append(checkpoint.save(net, out / name))
        manifest["checkpoints"] = {
            key: p.name for key, p in zip(nets, result.checkpoints)
        }
        with open(out / "metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(metrics_header(node_ids) + LOSS_COLUMNS + ["worker", "node", "update"])
            for w in workers:
                writer.writerows(w.rows)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    return result
