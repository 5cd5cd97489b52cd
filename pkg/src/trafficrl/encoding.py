"""Observation encoding: normalised densities plus one-hot signal phase."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from trafficrl.errors import ArgumentError
from trafficrl.sim.network import IntersectionNode, NetworkTopology
from trafficrl.sim.simulator import measure_density

NUM_PHASES = 4
SINGLE_SIZE = 8
MATRIX_SHAPE = (4, 8)


def encode_phase(phase_index: int) -> np.ndarray:
    if isinstance(phase_index, bool) or int(phase_index) != phase_index or not 0 <= phase_index < NUM_PHASES:
        raise ArgumentError(f"phase index must be in 0..3, got {phase_index!r}")
    out = np.zeros(NUM_PHASES)
    out[int(phase_index)] = 1.0
    return out


def encode_density(raw: Sequence[float]) -> np.ndarray:
    """Scale densities by their maximum; an all-zero input stays all-zero."""
    v = np.asarray(raw, dtype=float)
    if v.shape != (4,):
        raise ArgumentError(f"expected 4 densities, got shape {v.shape}")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ArgumentError(f"densities must be finite and >= 0, got {v.tolist()}")
    top = v.max()
    if top == 0.0:
        return np.zeros(4)
    out = v / top
    out[v == top] = 1.0
    return out


def encode_row(densities: Sequence[float], phase_index: int) -> np.ndarray:
    return np.concatenate([encode_density(densities), encode_phase(phase_index)])


def build_single_state(node: IntersectionNode) -> np.ndarray:
    """The 8-vector ``[encoded density, encoded phase]`` for one intersection."""
    return encode_row(measure_density(node), node.current_phase)


def build_neighbor_matrix(
    node: IntersectionNode,
    topology: NetworkTopology,
    neighbors: Sequence[str] | None = None,
) -> np.ndarray:
    """4x8 matrix: own row first, then up to three neighbours, zero-padded.

    Neighbour order is the scenario's declaration order unless ``neighbors``
    overrides it.
    """
    order = list(topology.neighbor_map[node.id] if neighbors is None else neighbors)[:3]
    out = np.zeros(MATRIX_SHAPE)
    out[0] = build_single_state(node)
    for row, nid in enumerate(order, start=1):
        out[row] = build_single_state(topology.intersections[nid])
    return out


def matrix_row_order(node_id: str, topology: NetworkTopology) -> list[str]:
    return [node_id] + list(topology.neighbor_map[node_id])[:3]
