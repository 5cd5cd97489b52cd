"""Parameter store shared by asynchronous workers."""

from __future__ import annotations

import threading
from collections import Counter

import numpy as np

from trafficrl.nn.layers import Params


def clip_by_global_norm(grads: Params, max_norm: float) -> tuple[Params, float]:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm > 0:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


class SharedParameterStore:
    """Holds the current parameters and RMSProp accumulators.

    Reads and gradient applications are serialised by one lock, so a reader
    never sees a half-updated parameter set.
    """

    def __init__(self, params: Params, learning_rate: float = 1e-4, decay: float = 0.99, eps: float = 1e-5) -> None:
        self._params = {k: v.copy() for k, v in params.items()}
        self._sq = {k: np.zeros_like(v) for k, v in params.items()}
        self.learning_rate = learning_rate
        self.decay = decay
        self.eps = eps
        self.updates = 0
        self.submitted: Counter = Counter()
        self._lock = threading.Lock()

    def snapshot(self) -> tuple[Params, int]:
        with self._lock:
            return {k: v.copy() for k, v in self._params.items()}, self.updates

    def apply(self, grads: Params, worker_id: int = 0) -> int:
        with self._lock:
            for k, g in grads.items():
                sq = self._sq[k]
                sq *= self.decay
                sq += (1.0 - self.decay) * g * g
                self._params[k] -= self.learning_rate * g / np.sqrt(sq + self.eps)
            self.updates += 1
            self.submitted[worker_id] += 1
            return self.updates
