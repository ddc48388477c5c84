import numpy as np
import pytest

from difflms import topology
from difflms.errors import TopologyFormatError


def bfs_connected(adjacency):
    """Independent breadth-first-search connectivity oracle."""
    n = adjacency.shape[0]
    seen = {0}
    queue = [0]
    while queue:
        node = queue.pop(0)
        for other in range(n):
            if adjacency[node, other] and other not in seen:
                seen.add(other)
                queue.append(other)
    return len(seen) == n


def test_complete_graph_neighborhoods():
    k8 = topology.complete_graph(8)
    assert list(k8.neighborhood_sizes()) == [8] * 8


def test_complete_graph_degenerate_and_smallest():
    single = topology.complete_graph(1)
    assert single.node_count == 1
    assert list(single.neighborhood_sizes()) == [1]
    pair = topology.complete_graph(2)
    assert pair.adjacency.all()


def test_complete_graph_rejects_zero_nodes():
    with pytest.raises(ValueError):
        topology.complete_graph(0)


def test_random_connected_deterministic():
    first = topology.random_connected(20, 0.2, seed=7)
    second = topology.random_connected(20, 0.2, seed=7)
    assert first == second


def test_random_connected_single_node():
    t = topology.random_connected(1, 0.5, seed=0)
    assert t.node_count == 1


def test_random_connected_valid_by_oracle():
    t = topology.random_connected(20, 0.2, seed=7)
    adj = t.adjacency
    assert np.array_equal(adj, adj.T)
    assert adj.diagonal().all()
    assert bfs_connected(adj)


def test_random_connected_sparse_falls_back_to_tree():
    # Edge probability too small for a connected draw at this size; the
    # spanning-tree augmentation must still deliver a connected graph.
    t = topology.random_connected(40, 0.01, seed=3)
    assert bfs_connected(t.adjacency)


def test_random_connected_rejects_bad_args():
    with pytest.raises(ValueError):
        topology.random_connected(0, 0.5, seed=1)
    with pytest.raises(ValueError):
        topology.random_connected(5, 0.0, seed=1)
    with pytest.raises(ValueError):
        topology.random_connected(5, 1.5, seed=1)


def path_graph(n):
    adj = np.eye(n, dtype=bool)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = True
    return topology.Topology(adj)


def test_neighborhood_sizes_path():
    assert list(path_graph(3).neighborhood_sizes()) == [2, 3, 2]


def test_topology_validation_rejects_bad_matrices():
    with pytest.raises(ValueError):
        topology.Topology(np.zeros((3, 3), dtype=bool))  # empty diagonal
    asym = np.eye(3, dtype=bool)
    asym[0, 1] = True
    with pytest.raises(ValueError):
        topology.Topology(asym)
    disconnected = np.eye(4, dtype=bool)
    disconnected[0, 1] = disconnected[1, 0] = True
    with pytest.raises(ValueError):
        topology.Topology(disconnected)


def test_adjacency_is_immutable():
    t = topology.complete_graph(3)
    with pytest.raises(ValueError):
        t.adjacency[0, 1] = False


def test_save_load_round_trip(tmp_path):
    t = topology.random_connected(12, 0.3, seed=11)
    path = tmp_path / "net.json"
    topology.save(t, path)
    assert topology.load(path) == t


def test_document_round_trip_random_graphs():
    for seed in range(25):
        t = topology.random_connected(2 + seed % 9, 0.4, seed=seed)
        assert topology.from_document(topology.to_document(t)) == t


def test_load_rejects_self_loop(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 1, "node_count": 3, "edges": [[0, 0], [0, 1], [1, 2]]}')
    with pytest.raises(TopologyFormatError, match=r"\(0, 0\)"):
        topology.load(path)


def test_load_rejects_disconnected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 1, "node_count": 3, "edges": [[0, 1]]}')
    with pytest.raises(TopologyFormatError, match="disconnected"):
        topology.load(path)


def test_load_rejects_duplicate_edge():
    doc = {"version": 1, "node_count": 3, "edges": [[0, 1], [1, 0], [1, 2]]}
    with pytest.raises(TopologyFormatError, match="duplicate"):
        topology.from_document(doc)


def test_load_rejects_out_of_range_edge():
    doc = {"version": 1, "node_count": 3, "edges": [[0, 3], [0, 1], [1, 2]]}
    with pytest.raises(TopologyFormatError, match="out of range"):
        topology.from_document(doc)


def test_load_rejects_unknown_version():
    with pytest.raises(TopologyFormatError, match="version"):
        topology.from_document({"version": 99, "node_count": 1, "edges": []})


def test_self_loops_never_serialized():
    doc = topology.to_document(topology.complete_graph(3))
    assert all(i != j for i, j in doc["edges"])
    assert len(doc["edges"]) == 3


def test_generated_topologies_satisfy_invariants():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(1, 25))
        t = topology.random_connected(n, float(rng.uniform(0.05, 1.0)), seed=int(rng.integers(1 << 32)))
        assert np.array_equal(t.adjacency, t.adjacency.T)
        assert t.adjacency.diagonal().all()
        assert bfs_connected(t.adjacency)
        assert (t.neighborhood_sizes() >= 1).all()
