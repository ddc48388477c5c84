import json

import numpy as np
import pytest

from difflms import scenario, topology
from difflms.errors import ConfigError

BASE_CONFIG = {
    "mu": 0.01,
    "filter_length": 6,
    "p_zeta": 0.8,
    "sigma_u2": 1.0,
    "rule": "uniform",
    "horizon": 100,
    "realizations": 4,
    "master_seed": 11,
    "noise_range": [0.001, 0.01],
    "noise_seed": 3,
    "topology": {"version": 1, "node_count": 4, "edges": [[0, 1], [1, 2], [2, 3]]},
}


def test_generate_optimal_system_deterministic_and_unit_norm():
    first = scenario.generate_optimal_system(10, seed=5)
    second = scenario.generate_optimal_system(10, seed=5)
    assert np.array_equal(first, second)
    assert abs(np.linalg.norm(first) - 1.0) <= 1e-12


def test_generate_optimal_system_scalar_is_sign():
    for seed in range(20):
        value = scenario.generate_optimal_system(1, seed=seed)
        assert value.shape == (1,)
        assert value[0] in (1.0, -1.0)


def test_generate_noise_profile_range_and_determinism():
    profile = scenario.generate_noise_profile(50, 0.001, 0.01, seed=2)
    assert profile.shape == (50,)
    assert ((profile >= 0.001) & (profile <= 0.01)).all()
    assert np.array_equal(profile, scenario.generate_noise_profile(50, 0.001, 0.01, seed=2))


def test_from_config_resolves_everything():
    spec = scenario.from_config(BASE_CONFIG)
    assert spec.node_count == 4
    assert spec.noise_variances.shape == (4,)
    assert spec.optimal_system.shape == (6,)
    assert spec.noise_range == (0.001, 0.01)
    assert spec.optimal_system_seed == 11  # defaults to master_seed


def test_config_round_trip_preserves_spec():
    spec = scenario.from_config(BASE_CONFIG)
    again = scenario.from_config(scenario.to_config(spec))
    assert again.topology == spec.topology
    assert np.array_equal(again.noise_variances, spec.noise_variances)
    assert np.array_equal(again.optimal_system, spec.optimal_system)
    assert again.mu == spec.mu and again.master_seed == spec.master_seed


def test_explicit_noise_and_system_vectors():
    doc = dict(BASE_CONFIG)
    doc.pop("noise_range")
    doc.pop("noise_seed")
    doc["noise_variances"] = [0.01, 0.02, 0.03, 0.04]
    doc["optimal_system"] = [1.0, 0, 0, 0, 0, 0]
    spec = scenario.from_config(doc)
    assert np.array_equal(spec.noise_variances, [0.01, 0.02, 0.03, 0.04])
    assert spec.optimal_system[0] == 1.0


def test_topology_from_file(tmp_path):
    net = topology.random_connected(5, 0.5, seed=9)
    topology.save(net, tmp_path / "net.json")
    doc = dict(BASE_CONFIG)
    doc["topology"] = "net.json"
    doc["noise_range"] = [0.001, 0.01]
    spec = scenario.from_config(doc, base_dir=tmp_path)
    assert spec.topology == net
    assert spec.noise_variances.shape == (5,)


def test_load_config(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(BASE_CONFIG))
    spec = scenario.load_config(path)
    assert spec.horizon == 100


def test_missing_key_raises_config_error():
    doc = dict(BASE_CONFIG)
    doc.pop("mu")
    with pytest.raises(ConfigError, match="mu"):
        scenario.from_config(doc)


def test_invariant_violations_raise():
    for key, value in [("p_zeta", 1.5), ("mu", -0.1), ("sigma_u2", 0.0),
                       ("horizon", 0), ("realizations", 0)]:
        doc = dict(BASE_CONFIG)
        doc[key] = value
        with pytest.raises(ConfigError):
            scenario.from_config(doc)


def test_noise_must_match_node_count():
    doc = dict(BASE_CONFIG)
    doc.pop("noise_range")
    doc["noise_variances"] = [0.01, 0.02]
    with pytest.raises(ConfigError, match="noise_variances"):
        scenario.from_config(doc)


def test_validate_spec_warns_above_stability_bound():
    doc = dict(BASE_CONFIG)
    doc["mu"] = 0.3  # bound is 2/8 = 0.25 for M=6
    spec = scenario.from_config(doc)
    errors, warnings = scenario.validate_spec(spec)
    assert not errors
    assert any("mean-stability bound" in w for w in warnings)


def test_validate_spec_warns_on_non_unit_system():
    doc = dict(BASE_CONFIG)
    doc["optimal_system"] = [2.0, 0, 0, 0, 0, 0]
    spec = scenario.from_config(doc)
    _, warnings = scenario.validate_spec(spec)
    assert any("unit norm" in w for w in warnings)
