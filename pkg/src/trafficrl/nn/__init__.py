"""Small numpy neural-network stack for the policy/value network."""

from trafficrl.nn.checkpoint import load, loads, save, dumps
from trafficrl.nn.gradcheck import GradCheckReport, grad_check, relative_error
from trafficrl.nn.losses import LossCoeffs, LossResult, actor_critic_loss
from trafficrl.nn.network import (
    NUM_CHOICES,
    NUM_HEADS,
    ActionSample,
    PolicyValueNet,
    RecurrentState,
    Trace,
    head_entropy,
    log_softmax,
    sample_action,
    softmax,
)

__all__ = [
    "NUM_CHOICES",
    "NUM_HEADS",
    "ActionSample",
    "GradCheckReport",
    "LossCoeffs",
    "LossResult",
    "PolicyValueNet",
    "RecurrentState",
    "Trace",
    "actor_critic_loss",
    "dumps",
    "grad_check",
    "head_entropy",
    "load",
    "loads",
    "log_softmax",
    "relative_error",
    "sample_action",
    "save",
    "softmax",
]
