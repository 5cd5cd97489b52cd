"""Actor-learner slots and the per-worker rollout/update loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from trafficrl.a3c.actions import action_to_plan
from trafficrl.a3c.config import TrainConfig
from trafficrl.a3c.returns import TrajectorySegment, compute_returns_advantages
from trafficrl.a3c.store import SharedParameterStore, clip_by_global_norm
from trafficrl.nn.losses import LossCoeffs, actor_critic_loss
from trafficrl.nn.network import PolicyValueNet, sample_action

log = logging.getLogger(__name__)


@dataclass
class UpdateRecord:
    worker_id: int
    node: str
    update_index: int
    local_update: int
    steps: int
    policy_loss: float
    value_loss: float
    entropy: float
    mean_reward: float
    grad_norm: float
    t_sec: float
    episode: int

    def key(self) -> tuple:
        return (
            self.worker_id, self.node, self.update_index, self.local_update, self.steps,
            repr(self.policy_loss), repr(self.value_loss), repr(self.entropy), repr(self.mean_reward),
        )


class AgentSlot:
    """Acts for one intersection; when ``store`` is set it also learns.

    Several slots may share one ``net`` (a worker's private copy); only the
    learning slot pulls fresh parameters from the store after its update.
    """

    def __init__(
        self,
        node: str,
        net: PolicyValueNet,
        store: SharedParameterStore | None,
        config: TrainConfig,
        rng: np.random.Generator,
        worker_id: int = 0,
    ) -> None:
        self.node = node
        self.net = net
        self.store = store
        self.config = config
        self.rng = rng
        self.worker_id = worker_id
        self.coeffs = LossCoeffs(config.value_coeff, config.entropy_coeff)
        self.state = net.initial_state()
        self.segment = TrajectorySegment()
        self.pending = False
        self.local_updates = 0
        self.decisions = 0

    @property
    def learning(self) -> bool:
        return self.store is not None

    def sync(self) -> None:
        params, _ = self.store.snapshot()
        self.net.set_params(params)

    def step(self, observation: np.ndarray, reward: float | None, done: bool, t: float = 0.0, episode: int = 0):
        """Consume the reward for the previous action and, unless the episode
        ended, choose the next action. Returns ``(update_record, indices)``."""
        record = None
        if self.pending:
            self.segment.rewards.append(0.0 if reward is None else float(reward))
            self.pending = False
        seg = self.segment
        if self.learning and len(seg) and (len(seg) >= self.config.t_max or done):
            _, bootstrap, _ = self.net.forward(observation, self.state)
            seg.bootstrap_value = bootstrap
            record = self._update(t, episode)
        if done:
            self.state = self.net.initial_state()
            self.segment = TrajectorySegment()
            return record, None
        if self.learning and not len(self.segment):
            self.segment.initial_state = self.state.copy()
        logits, value, next_state = self.net.forward(observation, self.state)
        sample = sample_action(logits, self.rng)
        if self.learning:
            self.segment.append(observation, sample.indices, sample.log_prob, sample.entropy, value)
            self.pending = True
        self.state = next_state
        self.decisions += 1
        return record, sample.indices

    def _update(self, t: float, episode: int) -> UpdateRecord:
        seg = self.segment
        seg.check(self.config.t_max)
        trace = self.net.forward_sequence(seg.observations, seg.initial_state)
        returns, advantages = compute_returns_advantages(seg.rewards, trace.values, self.config.gamma, seg.bootstrap_value)
        loss = actor_critic_loss(trace.logits, trace.values, np.array(seg.actions), returns, advantages, self.coeffs)
        grads = self.net.backward(trace, loss.dlogits, loss.dvalues)
        grads, norm = clip_by_global_norm(grads, self.config.grad_clip_norm)
        index = self.store.apply(grads, self.worker_id)
        self.sync()
        self.local_updates += 1
        n = len(seg)
        self.segment = TrajectorySegment()
        return UpdateRecord(
            worker_id=self.worker_id,
            node=self.node,
            update_index=index,
            local_update=self.local_updates,
            steps=n,
            policy_loss=loss.policy_loss / n,
            value_loss=loss.value_loss / n,
            entropy=loss.entropy / n,
            mean_reward=float(np.mean(seg.rewards)),
            grad_norm=norm,
            t_sec=t,
            episode=episode,
        )


def worker_loop(
    worker_id: int,
    env,
    slots: Mapping[str, AgentSlot],
    config: TrainConfig,
    epochs: int | None = None,
) -> Iterator[UpdateRecord]:
    """Run decision epochs until every learning slot has made ``epochs``
    decisions, yielding one record per gradient update."""
    budget = config.total_epochs if epochs is None else epochs
    learners = [s for s in slots.values() if s.learning]
    for s in learners:
        s.sync()
    decisions = env.reset()
    while True:
        plans = {}
        ended = bool(decisions) and decisions[0].done
        for d in decisions:
            slot = slots[d.node]
            reward = None if d.reward is None else d.reward.clipped
            record, action = slot.step(d.observation, reward, d.done, d.t, env.episode)
            if record is not None:
                yield record
            if action is not None:
                plans[d.node] = action_to_plan(action).greens
        if all(s.decisions >= budget for s in learners):
            return
        decisions = env.reset() if ended else env.advance(plans)
