"""Advantage actor-critic training over the signal-control environment."""

from trafficrl.a3c.actions import CYCLE_THRESHOLD, GREEN_CHOICES, GreenPlan, action_to_plan, plan_violation
from trafficrl.a3c.config import REGIMES, TrainConfig
from trafficrl.a3c.env import BanditEnv, Decision, SignalEnv
from trafficrl.a3c.policy import PolicyController
from trafficrl.a3c.returns import TrajectorySegment, compute_returns_advantages
from trafficrl.a3c.store import SharedParameterStore, clip_by_global_norm
from trafficrl.a3c.train import TrainResult, build_regime, train
from trafficrl.a3c.worker import AgentSlot, UpdateRecord, worker_loop
from trafficrl.nn.losses import actor_critic_loss

__all__ = [
    "CYCLE_THRESHOLD",
    "GREEN_CHOICES",
    "REGIMES",
    "AgentSlot",
    "BanditEnv",
    "Decision",
    "GreenPlan",
    "PolicyController",
    "SharedParameterStore",
    "SignalEnv",
    "TrainConfig",
    "TrainResult",
    "TrajectorySegment",
    "UpdateRecord",
    "action_to_plan",
    "actor_critic_loss",
    "build_regime",
    "clip_by_global_norm",
    "compute_returns_advantages",
    "plan_violation",
    "train",
    "worker_loop",
]
