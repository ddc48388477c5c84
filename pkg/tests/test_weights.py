import numpy as np
import pytest

from difflms import topology, weights

from test_topology import path_graph


def random_topology(rng, max_nodes=12):
    n = int(rng.integers(1, max_nodes + 1))
    if n == 1:
        return topology.complete_graph(1)
    return topology.random_connected(n, float(rng.uniform(0.2, 1.0)), seed=int(rng.integers(1 << 32)))


def test_non_cooperative_is_identity():
    t = topology.random_connected(3, 0.8, seed=1)
    assert np.array_equal(weights.non_cooperative(t), np.eye(3))
    assert np.array_equal(weights.non_cooperative(topology.complete_graph(1)), np.eye(1))


def test_uniform_on_complete_graph():
    for n in (1, 4, 8):
        c = weights.uniform(topology.complete_graph(n))
        assert np.allclose(c, np.full((n, n), 1.0 / n), atol=0, rtol=0)


def test_uniform_on_path():
    c = weights.uniform(path_graph(3))
    expected = np.array([
        [1 / 2, 1 / 3, 0],
        [1 / 2, 1 / 3, 1 / 2],
        [0, 1 / 3, 1 / 2],
    ])
    np.testing.assert_allclose(c, expected, rtol=0, atol=1e-15)


def test_metropolis_on_path():
    c = weights.metropolis(path_graph(3))
    expected = np.array([
        [2 / 3, 1 / 3, 0],
        [1 / 3, 1 / 3, 1 / 3],
        [0, 1 / 3, 2 / 3],
    ])
    np.testing.assert_allclose(c, expected, rtol=0, atol=1e-15)


def test_metropolis_coincides_with_uniform_on_complete_graphs():
    for n in (1, 2, 5, 8):
        t = topology.complete_graph(n)
        np.testing.assert_allclose(weights.metropolis(t), weights.uniform(t), rtol=0, atol=1e-15)


def test_build_dispatch_and_unknown_rule():
    t = path_graph(3)
    assert np.array_equal(weights.build("non-cooperative", t), np.eye(3))
    with pytest.raises(ValueError, match="unknown combination rule"):
        weights.build("hastings", t)


def test_constructors_pass_validation():
    rng = np.random.default_rng(7)
    for _ in range(100):
        t = random_topology(rng)
        for rule in weights.RULES:
            c = weights.build(rule, t)
            assert weights.validate(c, t) is None
            np.testing.assert_allclose(c.sum(axis=0), 1.0, rtol=0, atol=1e-12)


def test_validate_reports_column_sum_violation():
    t = path_graph(3)
    c = np.eye(3)
    c[:, 1] *= 0.9
    report = weights.validate(c, t)
    assert report is not None and "column 1 sums" in report


def test_validate_reports_support_violation():
    t = path_graph(3)
    c = weights.uniform(t).copy()
    # move weight onto the non-adjacent pair (0, 2), keeping the column stochastic
    c[0, 2] = 0.1
    c[2, 2] -= 0.1
    report = weights.validate(c, t)
    assert report is not None and "outside the neighborhood" in report


def test_validate_reports_negativity_first():
    t = path_graph(3)
    c = weights.uniform(t).copy()
    c[0, 0] = -0.1
    report = weights.validate(c, t)
    assert report is not None and "negative" in report


def test_validate_rejects_dimension_mismatch():
    with pytest.raises(ValueError, match="shape"):
        weights.validate(np.eye(2), path_graph(3))
