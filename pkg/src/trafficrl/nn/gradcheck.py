"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from trafficrl.nn.losses import LossCoeffs, actor_critic_loss
from trafficrl.nn.network import NUM_CHOICES, NUM_HEADS, PolicyValueNet, RecurrentState

# Policy-only, value-only and full objective.
LOSS_KINDS = {
    "policy": LossCoeffs(value_coeff=0.0, entropy_coeff=0.0, policy_coeff=1.0),
    "value": LossCoeffs(value_coeff=1.0, entropy_coeff=0.0, policy_coeff=0.0),
    "composite": LossCoeffs(value_coeff=0.5, entropy_coeff=0.01, policy_coeff=1.0),
}


@dataclass
class GradCheckReport:
    tolerance: float
    errors: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max((float(e.max()) for per in self.errors.values() for e in per.values() if e.size), default=0.0)

    @property
    def worst(self) -> tuple[str, str, int, float]:
        best = ("", "", -1, -1.0)
        for kind, per in self.errors.items():
            for name, e in per.items():
                if e.size and e.max() > best[3]:
                    best = (kind, name, int(e.argmax()), float(e.max()))
        return best

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def failures(self) -> list[tuple[str, str, int, float]]:
        out = []
        for kind, per in self.errors.items():
            for name, e in per.items():
                for i in np.flatnonzero(e >= self.tolerance):
                    out.append((kind, name, int(i), float(e[i])))
        return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-5) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps near-zero
    gradients from amplifying round-off."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def _problem(net: PolicyValueNet, steps: int, rng: np.random.Generator):
    shape = (8,) if net.variant == "single" else (4, 8)
    obs = [rng.uniform(0.0, 1.0, shape) for _ in range(steps)]
    actions = rng.integers(0, NUM_CHOICES, (steps, NUM_HEADS))
    returns = rng.normal(0.0, 0.5, steps)
    advantages = rng.normal(0.0, 1.0, steps)
    state = net.initial_state()
    for k in state.hidden:
        state.hidden[k] = rng.normal(0.0, 0.3, state.hidden[k].shape)
        state.cell[k] = rng.normal(0.0, 0.3, state.cell[k].shape)
    return obs, actions, returns, advantages, state


def loss_and_grads(net, params, obs, state: RecurrentState, actions, returns, advantages, coeffs):
    trace = net.forward_sequence(obs, state, params)
    res = actor_critic_loss(trace.logits, trace.values, actions, returns, advantages, coeffs)
    return res, trace


def grad_check(
    net: PolicyValueNet,
    observations=None,
    tolerance: float = 1e-4,
    step: float = 1e-5,
    seed: int = 0,
    steps: int = 3,
    kinds: tuple[str, ...] = ("policy", "value", "composite"),
    corrupt: tuple[str, int] | None = None,
) -> GradCheckReport:
    """Compare backprop against central differences for every parameter.

    ``corrupt=(name, flat_index)`` doubles one analytic gradient element
    before comparison (used to check that the harness catches faults).
    """
    rng = np.random.default_rng(seed)
    obs, actions, returns, advantages, state = _problem(net, steps, rng)
    if observations is not None:
        obs = [np.asarray(o, dtype=float) for o in observations]
        T = len(obs)
        actions, returns, advantages = actions[:T], returns[:T], advantages[:T]
        if T > steps:
            actions = rng.integers(0, NUM_CHOICES, (T, NUM_HEADS))
            returns = rng.normal(0.0, 0.5, T)
            advantages = rng.normal(0.0, 1.0, T)
    report = GradCheckReport(tolerance)
    base = {k: v.copy() for k, v in net.params.items()}
    unit = LossCoeffs(value_coeff=1.0, entropy_coeff=0.0, policy_coeff=1.0)

    def components() -> np.ndarray:
        res = loss_and_grads(net, base, obs, state, actions, returns, advantages, unit)[0]
        return np.array([res.policy_loss, res.value_loss, res.entropy])

    # the objective is linear in its coefficients, so one set of perturbed
    # evaluations of (policy, value, entropy) serves every loss kind
    numeric: dict[str, np.ndarray] = {}
    for name in net.param_names:
        flat = base[name].reshape(-1)
        out = np.empty((flat.size, 3))
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = components()
            flat[i] = old - step
            down = components()
            flat[i] = old
            out[i] = (up - down) / (2.0 * step)
        numeric[name] = out
    for kind in kinds:
        coeffs = LOSS_KINDS[kind]
        weights = np.array([coeffs.policy_coeff, coeffs.value_coeff, -coeffs.entropy_coeff])
        res, trace = loss_and_grads(net, base, obs, state, actions, returns, advantages, coeffs)
        analytic = net.backward(trace, res.dlogits, res.dvalues, base)
        if corrupt is not None:
            analytic[corrupt[0]].reshape(-1)[corrupt[1]] *= 2.0
        report.errors[kind] = {
            name: relative_error(analytic[name].reshape(-1), numeric[name] @ weights) for name in net.param_names
        }
    return report
