"""Trained-network controller used for evaluation."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from trafficrl.a3c.actions import action_to_plan
from trafficrl.nn.network import PolicyValueNet, sample_action


class PolicyController:
    """Chooses plans with trained nets; one net for all nodes or one per node.

    Greedy (per-head argmax) by default so evaluation is deterministic.
    """

    rl = True

    def __init__(
        self,
        nets: PolicyValueNet | Mapping[str, PolicyValueNet],
        greedy: bool = True,
        seed: int = 0,
        label: str = "RL",
    ) -> None:
        self.nets = nets
        self.greedy = greedy
        self.seed = seed
        self.label = label
        self.reset()

    @property
    def variant(self) -> str:
        net = self.nets if isinstance(self.nets, PolicyValueNet) else next(iter(self.nets.values()))
        return net.variant

    def net_for(self, node: str) -> PolicyValueNet:
        if isinstance(self.nets, PolicyValueNet):
            return self.nets
        if node not in self.nets:
            raise KeyError(f"no trained network for intersection {node}")
        return self.nets[node]

    def reset(self) -> None:
        self.states: dict[str, object] = {}
        self.rng = np.random.default_rng(self.seed)

    def plan(self, decision) -> tuple[int, ...]:
        net = self.net_for(decision.node)
        state = self.states.get(decision.node) or net.initial_state()
        logits, _, self.states[decision.node] = net.forward(decision.observation, state)
        sample = sample_action(logits, self.rng, greedy=self.greedy)
        return action_to_plan(sample.indices).greens
