"""Multiplication counts per iteration under random node sampling.

A sampled node spends 2M + 1 multiplications on adaptation (filtering,
error scaling, update) and every node spends M |N_k| on the combination
step, so the expected per-node cost is p_zeta (2M + 1) + M |N_k|.  Only
multiplications are counted; static combination weights are assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import Topology


@dataclass(frozen=True)
class CostReport:
    """Expected multiplication counts, optionally paired with a simulator tally."""

    per_node_expected: np.ndarray
    network_expected: float
    savings_expected: float
    empirical_average: float | None = None


def per_node_expected(filter_length: int, neighborhood_size: int, p_zeta: float) -> float:
    """Expected multiplications per iteration at one node: p (2M+1) + M |N_k|."""
    if filter_length < 1 or neighborhood_size < 1:
        raise ValueError("filter_length and neighborhood_size must be at least 1")
    return p_zeta * (2 * filter_length + 1) + filter_length * neighborhood_size


def network_expected(topology: Topology, filter_length: int, p_zeta: float) -> float:
    """Expected multiplications per iteration in the network: V p (2M+1) + M sum |N_k|."""
    sizes = topology.neighborhood_sizes()
    return topology.node_count * p_zeta * (2 * filter_length + 1) + filter_length * int(sizes.sum())


def savings_expected(node_count: int, filter_length: int, p_zeta: float) -> float:
    """Multiplications saved per iteration relative to p_zeta = 1: V (2M+1) (1 - p)."""
    return node_count * (2 * filter_length + 1) * (1.0 - p_zeta)


def cost_report(
    topology: Topology,
    filter_length: int,
    p_zeta: float,
    empirical_average: float | None = None,
) -> CostReport:
    """Assemble the per-node, network, and savings figures for one setting."""
    per_node = np.array(
        [per_node_expected(filter_length, int(size), p_zeta) for size in topology.neighborhood_sizes()]
    )
    return CostReport(
        per_node_expected=per_node,
        network_expected=float(per_node.sum()),
        savings_expected=savings_expected(topology.node_count, filter_length, p_zeta),
        empirical_average=empirical_average,
    )
