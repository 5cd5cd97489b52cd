"""Actor-critic objective and its gradient with respect to network outputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trafficrl.errors import ArgumentError
from trafficrl.nn.network import log_softmax


@dataclass
class LossCoeffs:
    value_coeff: float = 0.5
    entropy_coeff: float = 0.01
    policy_coeff: float = 1.0


@dataclass
class LossResult:
    total: float
    policy_loss: float
    value_loss: float
    entropy: float
    dlogits: np.ndarray
    dvalues: np.ndarray


def actor_critic_loss(
    logits: np.ndarray,
    values: np.ndarray,
    actions: np.ndarray,
    returns: np.ndarray,
    advantages: np.ndarray,
    coeffs: LossCoeffs | None = None,
) -> LossResult:
    """Policy-gradient + value regression - entropy bonus, summed over steps.

    ``advantages`` and ``returns`` are constants: no gradient flows through
    them. Returns the scalar loss and its gradient with respect to ``logits``
    (T, heads, choices) and ``values`` (T,).
    """
    coeffs = coeffs or LossCoeffs()
    logits = np.asarray(logits, dtype=float)
    values = np.asarray(values, dtype=float)
    actions = np.asarray(actions, dtype=int)
    returns = np.asarray(returns, dtype=float)
    advantages = np.asarray(advantages, dtype=float)
    T = logits.shape[0]
    if not (values.shape == (T,) and returns.shape == (T,) and advantages.shape == (T,)
            and actions.shape == logits.shape[:2]):
        raise ArgumentError(
            f"length mismatch: logits {logits.shape}, values {values.shape}, actions {actions.shape}, "
            f"returns {returns.shape}, advantages {advantages.shape}"
        )
    lp = log_softmax(logits)
    probs = np.exp(lp)
    t_idx, h_idx = np.meshgrid(np.arange(T), np.arange(logits.shape[1]), indexing="ij")
    taken_lp = lp[t_idx, h_idx, actions].sum(axis=1)  # joint log-prob per step
    ent_heads = -(probs * lp).sum(axis=-1)  # (T, heads)

    policy_loss = -float(np.sum(taken_lp * advantages))
    err = returns - values
    value_loss = float(np.sum(err * err))
    entropy = float(ent_heads.sum())
    total = coeffs.policy_coeff * policy_loss + coeffs.value_coeff * value_loss - coeffs.entropy_coeff * entropy

    onehot = np.zeros_like(logits)
    onehot[t_idx, h_idx, actions] = 1.0
    d_policy = -(onehot - probs) * advantages[:, None, None]
    d_entropy = -probs * (lp + ent_heads[..., None])
    dlogits = coeffs.policy_coeff * d_policy - coeffs.entropy_coeff * d_entropy
    dvalues = -2.0 * coeffs.value_coeff * err
    return LossResult(total, policy_loss, value_loss, entropy, dlogits, dvalues)
