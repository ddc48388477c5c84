"""Undirected network topologies with self-inclusive neighborhoods.

A node's neighborhood always contains the node itself, so the adjacency
matrix carries an all-true diagonal.  All graphs are connected; node
indices are 0-based everywhere in the API.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TopologyFormatError

FORMAT_VERSION = 1

# Erdos-Renyi redraws before falling back to spanning-tree augmentation.
_CONNECT_RETRIES = 100


@dataclass(frozen=True, eq=False)
class Topology:
    """Connected undirected graph stored as a boolean adjacency matrix.

    The matrix is symmetric with an all-true diagonal and is frozen after
    construction, so instances can be shared freely across threads.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise ValueError(f"adjacency must be a non-empty square matrix, got shape {adj.shape}")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if not adj.diagonal().all():
            raise ValueError("every node must belong to its own neighborhood")
        if not _is_connected(adj):
            raise ValueError("graph must be connected")
        adj.flags.writeable = False
        object.__setattr__(self, "adjacency", adj)

    def __eq__(self, other) -> bool:
        return isinstance(other, Topology) and np.array_equal(self.adjacency, other.adjacency)

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    def neighborhood_sizes(self) -> np.ndarray:
        """|N_k| for every node k, counting k itself."""
        return self.adjacency.sum(axis=0).astype(np.int64)

    def neighbors(self, node: int) -> np.ndarray:
        """Indices of the nodes in N_k, including ``node`` itself."""
        return np.flatnonzero(self.adjacency[:, node])

    def edge_list(self) -> list[tuple[int, int]]:
        """Undirected edges (i, j) with i < j; self-loops are implied, never listed."""
        rows, cols = np.triu_indices(self.node_count, k=1)
        keep = self.adjacency[rows, cols]
        return [(int(i), int(j)) for i, j in zip(rows[keep], cols[keep])]


def _is_connected(adjacency: np.ndarray) -> bool:
    n = adjacency.shape[0]
    visited = np.zeros(n, dtype=bool)
    visited[0] = True
    frontier = visited.copy()
    while frontier.any():
        reached = adjacency[:, frontier].any(axis=1)
        frontier = reached & ~visited
        visited |= frontier
    return bool(visited.all())


def complete_graph(node_count: int) -> Topology:
    """Fully connected topology K_V; every neighborhood has size V."""
    if node_count < 1:
        raise ValueError("node_count must be at least 1")
    return Topology(np.ones((node_count, node_count), dtype=bool))


def random_connected(node_count: int, edge_prob: float, seed: int) -> Topology:
    """Seeded Erdos-Renyi graph, redrawn until connected.

    After ``_CONNECT_RETRIES`` failed draws the last sample is augmented
    with a random spanning tree, so the call always terminates.  The result
    is a pure function of ``(node_count, edge_prob, seed)``.
    """
    if node_count < 1:
        raise ValueError("node_count must be at least 1")
    if not 0.0 < edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    for _ in range(_CONNECT_RETRIES):
        adjacency = _erdos_renyi_draw(node_count, edge_prob, rng)
        if _is_connected(adjacency):
            return Topology(adjacency)
    adjacency = _erdos_renyi_draw(node_count, edge_prob, rng)
    order = rng.permutation(node_count)
    for pos in range(1, node_count):
        a = order[pos]
        b = order[rng.integers(pos)]  # attach to a node already in the tree
        adjacency[a, b] = adjacency[b, a] = True
    return Topology(adjacency)


def _erdos_renyi_draw(node_count: int, edge_prob: float, rng: np.random.Generator) -> np.ndarray:
    rows, cols = np.triu_indices(node_count, k=1)
    present = rng.random(rows.size) < edge_prob
    adjacency = np.eye(node_count, dtype=bool)
    adjacency[rows[present], cols[present]] = True
    adjacency |= adjacency.T
    return adjacency


def save(topology: Topology, path) -> None:
    """Write the edge-list document (JSON: version, node_count, edges)."""
    doc = {
        "version": FORMAT_VERSION,
        "node_count": topology.node_count,
        "edges": [list(edge) for edge in topology.edge_list()],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load(path) -> Topology:
    """Read an edge-list document written by :func:`save`.

    Raises :class:`TopologyFormatError` naming the offending item for
    self-loops, duplicate or out-of-range edges, and disconnected graphs.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TopologyFormatError(f"not a valid topology document: {exc}") from exc
    return from_document(doc)


def from_document(doc: dict) -> Topology:
    """Build a Topology from a parsed edge-list document."""
    if not isinstance(doc, dict):
        raise TopologyFormatError("topology document must be a mapping")
    if doc.get("version") != FORMAT_VERSION:
        raise TopologyFormatError(f"unsupported topology format version: {doc.get('version')!r}")
    node_count = doc.get("node_count")
    if not isinstance(node_count, int) or node_count < 1:
        raise TopologyFormatError(f"node_count must be a positive integer, got {node_count!r}")
    edges = doc.get("edges")
    if not isinstance(edges, list):
        raise TopologyFormatError("edges must be a list of [i, j] pairs")
    adjacency = np.eye(node_count, dtype=bool)
    seen: set[tuple[int, int]] = set()
    for item in edges:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise TopologyFormatError(f"edge {item!r} is not an [i, j] pair")
        i, j = item
        if not isinstance(i, int) or not isinstance(j, int):
            raise TopologyFormatError(f"edge {item!r} has non-integer endpoints")
        if i == j:
            raise TopologyFormatError(f"edge ({i}, {j}) is a self-loop; self-loops are implicit")
        if not (0 <= i < node_count and 0 <= j < node_count):
            raise TopologyFormatError(f"edge ({i}, {j}) is out of range for node_count={node_count}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise TopologyFormatError(f"duplicate edge ({i}, {j})")
        seen.add(key)
        adjacency[i, j] = adjacency[j, i] = True
    if not _is_connected(adjacency):
        raise TopologyFormatError("edge list describes a disconnected graph")
    return Topology(adjacency)


def to_document(topology: Topology) -> dict:
    """Edge-list document for inline embedding in a scenario config."""
    return {
        "version": FORMAT_VERSION,
        "node_count": topology.node_count,
        "edges": [list(edge) for edge in topology.edge_list()],
    }
