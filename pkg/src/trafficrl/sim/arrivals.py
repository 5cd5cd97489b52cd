"""Boundary demand: Weibull inter-arrival sampling and pre-drawn schedules."""

from __future__ import annotations

import hashlib
import math

import numpy as np

from trafficrl.errors import ParameterError


def _check(shape: float, scale: float) -> None:
    if not (shape > 0 and math.isfinite(shape)):
        raise ParameterError(f"Weibull shape must be > 0, got {shape}")
    if not (scale > 0 and math.isfinite(scale)):
        raise ParameterError(f"Weibull scale must be > 0, got {scale}")


def weibull_from_uniform(u, shape: float, scale: float):
    """Inverse-CDF transform ``scale * (-ln u) ** (1 / shape)``; works on arrays."""
    _check(shape, scale)
    return scale * (-np.log(u)) ** (1.0 / shape)


def sample_interarrival(rng: np.random.Generator, shape: float, scale: float) -> float:
    """Draw one strictly positive Weibull inter-arrival time in seconds."""
    _check(shape, scale)
    while True:
        u = rng.random()
        if 0.0 < u < 1.0:
            return float(weibull_from_uniform(u, shape, scale))


def weibull_mean(shape: float, scale: float) -> float:
    _check(shape, scale)
    return scale * math.gamma(1.0 + 1.0 / shape)


def section_rng(seed: int, section_index: int) -> np.random.Generator:
    """Independent stream per boundary section, derived from the run seed only."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0xA11, int(section_index)]))


def arrival_schedule(
    kind: str, shape: float, scale: float, horizon: float, rng: np.random.Generator
) -> np.ndarray:
    """Absolute arrival times in ``[0, horizon)`` for one boundary section.

    Drawn up front so that every controller evaluated on the same seed sees
    the identical demand.
    """
    if kind == "none":
        return np.empty(0)
    mean = weibull_mean(shape, scale)
    if kind == "deterministic":
        return np.arange(mean, horizon, mean)
    chunks = []
    t = 0.0
    n = max(16, int(horizon / mean * 1.2) + 16)
    while t < horizon:
        u = rng.random(n)
        u[u == 0.0] = 0.5  # P(u == 0) is ~2**-53; replace to keep gaps > 0
        gaps = weibull_from_uniform(u, shape, scale)
        times = t + np.cumsum(gaps)
        chunks.append(times)
        t = float(times[-1])
    times = np.concatenate(chunks)
    return times[times < horizon]


def schedule_digest(schedules: list[np.ndarray]) -> str:
    h = hashlib.sha256()
    for s in schedules:
        h.update(np.ascontiguousarray(s, dtype="<f8").tobytes())
        h.update(b"|")
    return h.hexdigest()
