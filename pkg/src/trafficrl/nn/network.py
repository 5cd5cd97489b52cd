"""Policy/value network used by every training regime.

``single`` variant: 8-vector -> linear(tanh) -> LSTM(H) -> heads.
``multi`` variant:  4x8 matrix -> Conv-LSTM(C channels) -> flatten -> heads.

The policy head emits four independent 9-way categorical distributions, one
per approach; the value head emits one scalar. With ``shared_trunk=False`` the
value head gets its own copy of the trunk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from trafficrl.errors import ArgumentError, ShapeError, UsageError
from trafficrl.nn.layers import ConvLSTMCell, LSTMCell, Linear, Params

NUM_HEADS = 4
NUM_CHOICES = 9
VARIANTS = ("single", "multi")
INPUT_SHAPES = {"single": (8,), "multi": (4, 8)}


@dataclass
class RecurrentState:
    """Hidden and cell tensors per recurrent trunk (keyed by trunk name)."""

    hidden: dict[str, np.ndarray]
    cell: dict[str, np.ndarray]

    def copy(self) -> "RecurrentState":
        return RecurrentState({k: v.copy() for k, v in self.hidden.items()}, {k: v.copy() for k, v in self.cell.items()})


class _Trunk:
    def __init__(self, prefix: str, variant: str, hidden: int, channels: int, kernel: int) -> None:
        self.prefix = prefix
        self.variant = variant
        if variant == "single":
            self.embed = Linear(f"{prefix}.embed", 8, hidden, activation="tanh")
            self.cell = LSTMCell(f"{prefix}.lstm", hidden, hidden)
            self.features = hidden
            self.layers = [self.embed, self.cell]
        else:
            self.embed = None
            self.cell = ConvLSTMCell(f"{prefix}.convlstm", 1, channels, (4, 8), kernel)
            self.features = channels * 4 * 8
            self.layers = [self.cell]

    def forward(self, p: Params, obs: np.ndarray, h: np.ndarray, c: np.ndarray):
        if self.embed is not None:
            x, emb_cache = self.embed.forward(p, obs)
        else:
            x, emb_cache = obs[None, :, :], None
        h_new, c_new, cell_cache = self.cell.forward(p, x, h, c)
        return h_new, c_new, (emb_cache, cell_cache)

    def backward(self, p: Params, dh, dc, cache, grads: Params):
        emb_cache, cell_cache = cache
        dx, dh_prev, dc_prev = self.cell.backward(p, dh, dc, cell_cache, grads)
        if self.embed is not None:
            self.embed.backward(p, dx, emb_cache, grads)
        return dh_prev, dc_prev


@dataclass
class Trace:
    """Recorded forward pass over a sequence, consumed by ``backward``."""

    logits: np.ndarray  # (T, 4, 9)
    values: np.ndarray  # (T,)
    final_state: RecurrentState
    caches: list = field(repr=False, default_factory=list)


class PolicyValueNet:
    def __init__(
        self,
        variant: str = "single",
        hidden: int = 64,
        channels: int = 16,
        kernel: int = 3,
        shared_trunk: bool = True,
        seed: int | None = 0,
        zero: bool = False,
    ) -> None:
        if variant not in VARIANTS:
            raise ArgumentError(f"variant must be one of {VARIANTS}, got {variant!r}")
        if hidden < 1 or channels < 1:
            raise ArgumentError("hidden and channels must be positive")
        self.variant = variant
        self.hidden = int(hidden)
        self.channels = int(channels)
        self.kernel = int(kernel)
        self.shared_trunk = bool(shared_trunk)
        names = ["trunk"] if shared_trunk else ["pi", "vf"]
        self.trunks = {n: _Trunk(n, variant, self.hidden, self.channels, self.kernel) for n in names}
        feat = self.trunks[names[0]].features
        self.policy_head = Linear("policy", feat, NUM_HEADS * NUM_CHOICES)
        self.value_head = Linear("value", feat, 1)
        self._policy_trunk = self.trunks[names[0]]
        self._value_trunk = self.trunks[names[-1]]

        self.shapes: dict[str, tuple[int, ...]] = {}
        for t in self.trunks.values():
            for layer in t.layers:
                self.shapes.update(layer.shapes())
        self.shapes.update(self.policy_head.shapes())
        self.shapes.update(self.value_head.shapes())

        self.params: Params = {}
        if zero:
            self.params = {k: np.zeros(s) for k, s in self.shapes.items()}
        else:
            rng = np.random.default_rng(seed)
            for t in self.trunks.values():
                for layer in t.layers:
                    layer.init(rng, self.params)
            self.policy_head.init(rng, self.params, gain=0.1)
            self.value_head.init(rng, self.params)
            self.params = {k: self.params[k] for k in self.shapes}

    # ----------------------------------------------------------- parameters
    @property
    def param_names(self) -> list[str]:
        return list(self.shapes)

    def param_count(self) -> int:
        return int(sum(np.prod(s) for s in self.shapes.values()))

    def get_params(self) -> Params:
        return {k: v.copy() for k, v in self.params.items()}

    def set_params(self, params: Params) -> None:
        for k, shape in self.shapes.items():
            if k not in params:
                raise ShapeError(f"parameter {k} missing")
            if params[k].shape != shape:
                raise ShapeError(f"parameter {k}: expected shape {shape}, got {params[k].shape}")
        self.params = {k: np.array(params[k], dtype=float, copy=True) for k in self.shapes}

    def clone(self) -> "PolicyValueNet":
        other = PolicyValueNet(
            self.variant, self.hidden, self.channels, self.kernel, self.shared_trunk, zero=True
        )
        other.set_params(self.params)
        return other

    def zero_grads(self) -> Params:
        return {k: np.zeros(s) for k, s in self.shapes.items()}

    def config(self) -> dict:
        return {
            "variant": self.variant,
            "hidden": self.hidden,
            "channels": self.channels,
            "kernel": self.kernel,
            "shared_trunk": self.shared_trunk,
        }

    # ----------------------------------------------------------- state
    def initial_state(self) -> RecurrentState:
        h, c = {}, {}
        for name, t in self.trunks.items():
            h[name] = np.zeros(t.cell.state_shape)
            c[name] = np.zeros(t.cell.state_shape)
        return RecurrentState(h, c)

    def _check_state(self, state: RecurrentState) -> None:
        for name, t in self.trunks.items():
            for kind, store in (("hidden", state.hidden), ("cell", state.cell)):
                if name not in store:
                    raise ShapeError(f"recurrent state lacks {kind} tensor for trunk '{name}'")
                if store[name].shape != t.cell.state_shape:
                    raise ShapeError(
                        f"layer '{t.cell.name}' {kind} state: expected shape {t.cell.state_shape}, "
                        f"got {store[name].shape}"
                    )

    def _check_obs(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        expected = INPUT_SHAPES[self.variant]
        if obs.shape != expected:
            raise ShapeError(
                f"layer 'input' of the {self.variant} network expects observation shape {expected}, got {obs.shape}"
            )
        return obs

    # ----------------------------------------------------------- passes
    def forward_sequence(self, observations, state: RecurrentState, params: Params | None = None) -> Trace:
        """Run the net over consecutive observations, carrying recurrent state."""
        p = self.params if params is None else params
        self._check_state(state)
        obs_list = [self._check_obs(o) for o in observations]
        h = {k: v for k, v in state.hidden.items()}
        c = {k: v for k, v in state.cell.items()}
        T = len(obs_list)
        logits = np.empty((T, NUM_HEADS, NUM_CHOICES))
        values = np.empty(T)
        caches = []
        for t, obs in enumerate(obs_list):
            step = {}
            for name, trunk in self.trunks.items():
                h[name], c[name], step[name] = trunk.forward(p, obs, h[name], c[name])
            pf = h[self._policy_trunk.prefix].reshape(-1)
            vf = h[self._value_trunk.prefix].reshape(-1)
            lo, pc = self.policy_head.forward(p, pf)
            va, vc = self.value_head.forward(p, vf)
            logits[t] = lo.reshape(NUM_HEADS, NUM_CHOICES)
            values[t] = va[0]
            caches.append((step, pc, vc))
        return Trace(logits, values, RecurrentState(h, c), caches)

    def forward(self, observation, state: RecurrentState, params: Params | None = None):
        """One step: returns ``(policy_logits (4, 9), value, next_state)``."""
        tr = self.forward_sequence([observation], state, params)
        return tr.logits[0], float(tr.values[0]), tr.final_state

    def backward(
        self, trace: Trace | None, dlogits: np.ndarray, dvalues: np.ndarray, params: Params | None = None
    ) -> Params:
        """Backpropagate output gradients through the recorded sequence.

        ``dlogits`` has shape (T, 4, 9), ``dvalues`` shape (T,). The initial
        recurrent state is treated as a constant.
        """
        if trace is None or not trace.caches:
            raise UsageError("backward called without a recorded forward pass")
        p = self.params if params is None else params
        T = len(trace.caches)
        dlogits = np.asarray(dlogits, dtype=float)
        dvalues = np.asarray(dvalues, dtype=float)
        if dlogits.shape != (T, NUM_HEADS, NUM_CHOICES) or dvalues.shape != (T,):
            raise ShapeError(
                f"output gradients must have shapes {(T, NUM_HEADS, NUM_CHOICES)} and {(T,)}, "
                f"got {dlogits.shape} and {dvalues.shape}"
            )
        grads = self.zero_grads()
        dh = {name: np.zeros(t.cell.state_shape) for name, t in self.trunks.items()}
        dc = {name: np.zeros(t.cell.state_shape) for name, t in self.trunks.items()}
        for t in range(T - 1, -1, -1):
            step, pc, vc = trace.caches[t]
            dpf = self.policy_head.backward(p, dlogits[t].reshape(-1), pc, grads)
            dvf = self.value_head.backward(p, dvalues[t : t + 1], vc, grads)
            pname, vname = self._policy_trunk.prefix, self._value_trunk.prefix
            dh[pname] = dh[pname] + dpf.reshape(dh[pname].shape)
            dh[vname] = dh[vname] + dvf.reshape(dh[vname].shape)
            for name, trunk in self.trunks.items():
                dh[name], dc[name] = trunk.backward(p, dh[name], dc[name], step[name], grads)
        return grads


# ------------------------------------------------------------- action helpers
def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def head_entropy(logits: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    return -(np.exp(lp) * lp).sum(axis=-1)


@dataclass
class ActionSample:
    indices: np.ndarray
    log_prob: float
    entropy: float


def sample_action(policy_logits: np.ndarray, rng: np.random.Generator, greedy: bool = False) -> ActionSample:
    """Draw one index per head; joint log-prob and entropy are per-head sums."""
    logits = np.asarray(policy_logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise ArgumentError("policy logits must be finite")
    lp = log_softmax(logits)
    probs = np.exp(lp)
    if greedy:
        idx = probs.argmax(axis=-1)
    else:
        u = rng.random(logits.shape[0])
        cdf = np.cumsum(probs, axis=-1)
        idx = np.minimum((cdf < (u * cdf[:, -1])[:, None]).sum(axis=-1), logits.shape[-1] - 1)
    rows = np.arange(logits.shape[0])
    return ActionSample(idx.astype(int), float(lp[rows, idx].sum()), float(head_entropy(logits).sum()))
