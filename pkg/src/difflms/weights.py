"""Combination matrices for the static rules (non-cooperative, uniform, Metropolis).

Orientation is fixed once and for all: entry ``C[i, k]`` is c_ik, the weight
node k applies to node i's local estimate, so every column of C is a
probability vector supported on N_k (C is left-stochastic).
"""

from __future__ import annotations

import numpy as np

from .topology import Topology

RULES = ("non-cooperative", "uniform", "metropolis")

# Column sums may drift by accumulation error over V <= 1000 terms.
STOCHASTIC_TOL = 1e-12


def non_cooperative(topology: Topology) -> np.ndarray:
    """C = I: nodes never exchange estimates."""
    return np.eye(topology.node_count)


def uniform(topology: Topology) -> np.ndarray:
    """c_ik = 1/|N_k| for i in N_k, zero elsewhere."""
    sizes = topology.neighborhood_sizes().astype(float)
    return topology.adjacency / sizes[np.newaxis, :]


def metropolis(topology: Topology) -> np.ndarray:
    """c_ik = 1/max(|N_k|, |N_i|) off-diagonal within N_k; diagonal absorbs the rest."""
    sizes = topology.neighborhood_sizes().astype(float)
    weights = np.where(topology.adjacency, 1.0 / np.maximum.outer(sizes, sizes), 0.0)
    np.fill_diagonal(weights, 0.0)
    np.fill_diagonal(weights, 1.0 - weights.sum(axis=0))
    return weights


_BUILDERS = {
    "non-cooperative": non_cooperative,
    "uniform": uniform,
    "metropolis": metropolis,
}


def build(rule: str, topology: Topology) -> np.ndarray:
    """Combination matrix for one of the rule names in :data:`RULES`."""
    try:
        builder = _BUILDERS[rule]
    except KeyError:
        raise ValueError(f"unknown combination rule {rule!r}; expected one of {RULES}") from None
    return builder(topology)


def validate(weights: np.ndarray, topology: Topology) -> str | None:
    """Check the combination-weight constraints; return the first violation.

    Clauses are checked in order: non-negativity, column stochasticity
    (within :data:`STOCHASTIC_TOL`), support confined to the neighborhoods.
    Returns ``None`` when all hold.
    """
    weights = np.asarray(weights, dtype=float)
    n = topology.node_count
    if weights.shape != (n, n):
        raise ValueError(f"weight matrix shape {weights.shape} does not match {n} nodes")
    negative = np.argwhere(weights < 0.0)
    if negative.size:
        i, k = negative[0]
        return f"negative weight c[{i},{k}] = {weights[i, k]:.3e}"
    sums = weights.sum(axis=0)
    off = np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL)
    if off.size:
        k = off[0]
        return f"column {k} sums to {sums[k]:.15f}, expected 1"
    outside = np.argwhere((weights != 0.0) & ~topology.adjacency)
    if outside.size:
        i, k = outside[0]
        return f"nonzero weight c[{i},{k}] outside the neighborhood of node {k}"
    return None
