import numpy as np
import pytest

from difflms import scenario, simulation, theory, topology


def make_spec(**overrides):
    defaults = dict(
        topology=topology.random_connected(3, 0.7, seed=4),
        rule="metropolis",
        mu=0.05,
        filter_length=4,
        p_zeta=0.7,
        sigma_u2=1.0,
        noise_variances=np.array([0.01, 0.005, 0.002]),
        optimal_system=scenario.generate_optimal_system(4, seed=3),
        horizon=200,
        realizations=5,
        master_seed=42,
    )
    defaults.update(overrides)
    return scenario.ScenarioSpec(**defaults)


def test_streams_are_deterministic_and_distinct():
    a = simulation.realization_streams(9, 2)
    b = simulation.realization_streams(9, 2)
    assert np.array_equal(a.input.standard_normal(8), b.input.standard_normal(8))
    c = simulation.realization_streams(9, 3)
    assert not np.array_equal(b.noise.standard_normal(8), c.noise.standard_normal(8))


def test_step_without_sampling_only_combines():
    # p_zeta = 0: the adaptation step is skipped but combination still runs.
    spec = make_spec(p_zeta=0.0)
    combination = spec.combination_matrix()
    state = simulation.initial_state(spec)
    rng = np.random.default_rng(1)
    state.w = rng.standard_normal(state.w.shape)
    before = state.w.copy()
    simulation.step(state, spec, simulation.realization_streams(0, 0), combination=combination)
    np.testing.assert_allclose(state.w, combination.T @ before, rtol=0, atol=1e-15)


def test_step_non_cooperative_unsampled_keeps_estimates():
    spec = make_spec(rule="non-cooperative", p_zeta=0.0)
    state = simulation.initial_state(spec)
    state.w = np.random.default_rng(2).standard_normal(state.w.shape)
    before = state.w.copy()
    for _ in range(10):
        simulation.step(state, spec, simulation.realization_streams(0, 0))
    assert np.array_equal(state.w, before)


def test_single_node_full_sampling_is_plain_lms():
    spec = make_spec(
        topology=topology.complete_graph(1),
        rule="non-cooperative",
        p_zeta=1.0,
        filter_length=5,
        noise_variances=np.array([0.01]),
        optimal_system=scenario.generate_optimal_system(5, seed=8),
    )
    state = simulation.initial_state(spec)
    streams = simulation.realization_streams(spec.master_seed, 0)
    mirror = simulation.realization_streams(spec.master_seed, 0)

    w = np.zeros(5)
    buf = np.zeros(5)
    for _ in range(50):
        simulation.step(state, spec, streams)
        u_new = mirror.input.standard_normal(1)[0] * 1.0
        v = mirror.noise.standard_normal(1)[0] * np.sqrt(0.01)
        mirror.sampling.random(1)
        buf[1:] = buf[:-1]
        buf[0] = u_new
        d = buf @ spec.optimal_system + v
        e = d - buf @ w
        w = w + spec.mu * e * buf
        # identical recursion; only summation order differs (last-bit noise)
        np.testing.assert_allclose(state.w[0], w, rtol=1e-12, atol=1e-15)


def test_run_realization_matches_step_loop():
    spec = make_spec(horizon=300)
    result = simulation.run_realization(spec, 2)
    state = simulation.initial_state(spec)
    streams = simulation.realization_streams(spec.master_seed, 2)
    combination = spec.combination_matrix()
    reference = np.empty((spec.horizon, spec.node_count))
    reference[0] = np.dot(spec.optimal_system, spec.optimal_system)
    for n in range(1, spec.horizon):
        simulation.step(state, spec, streams, combination=combination)
        deviation = spec.optimal_system - state.w
        reference[n] = np.einsum("km,km->k", deviation, deviation)
    np.testing.assert_allclose(result.squared_deviations, reference, rtol=1e-9, atol=1e-14)


def test_run_realization_deterministic_and_initialized_at_system_norm():
    spec = make_spec()
    first = simulation.run_realization(spec, 1)
    second = simulation.run_realization(spec, 1)
    assert np.array_equal(first.squared_deviations, second.squared_deviations)
    w_norm2 = float(np.dot(spec.optimal_system, spec.optimal_system))
    assert np.allclose(first.squared_deviations[0], w_norm2, rtol=0, atol=0)
    assert abs(w_norm2 - 1.0) <= 1e-12


def test_monte_carlo_single_realization_equals_run_realization():
    spec = make_spec(realizations=1)
    mc = simulation.monte_carlo(spec, workers=1)
    rr = simulation.run_realization(spec, 0)
    assert np.array_equal(mc.nmsd_linear, rr.squared_deviations.mean(axis=1))


def test_monte_carlo_without_sampling_is_flat_at_zero_db():
    spec = make_spec(p_zeta=0.0, realizations=3, horizon=50)
    result = simulation.monte_carlo(spec, workers=1)
    np.testing.assert_allclose(result.nmsd_db, 0.0, rtol=0, atol=1e-12)


def test_monte_carlo_worker_count_does_not_change_results():
    spec = make_spec(realizations=6, horizon=150)
    curves = [
        simulation.monte_carlo(spec, workers=n).nmsd_linear for n in (1, 2, 3)
    ]
    assert np.array_equal(curves[0], curves[1])
    assert np.array_equal(curves[0], curves[2])


def test_monte_carlo_reports_total_divergence():
    # mu far above the stability bound with C = I diverges in every realization.
    spec = make_spec(rule="non-cooperative", mu=2.5, filter_length=8,
                     optimal_system=scenario.generate_optimal_system(8, seed=1),
                     realizations=4, horizon=3000)
    result = simulation.monte_carlo(spec, workers=1)
    assert result.diverged_fraction == 1.0
    assert result.nmsd_linear.size == 0
    assert result.steady_state_db is None
    with pytest.raises(ValueError, match="empty curve"):
        simulation.steady_state_nmsd(result)


def test_noiseless_small_step_converges_below_minus_100_db():
    spec = make_spec(
        topology=topology.complete_graph(1),
        rule="non-cooperative",
        mu=0.05,
        p_zeta=1.0,
        noise_variances=np.array([1e-30]),
        horizon=1500,
        realizations=2,
        filter_length=4,
    )
    result = simulation.monte_carlo(spec, workers=1)
    assert result.nmsd_db[-1] < -100.0


def test_detect_divergence():
    spec = make_spec()
    state = simulation.initial_state(spec)
    assert not simulation.detect_divergence(state)
    state.w[0, 0] = np.nan
    assert simulation.detect_divergence(state)
    state.w[0, 0] = 0.0
    state.w[1, :] = 1e80  # ||w||^2 = 4e160 above the overflow guard
    assert simulation.detect_divergence(state)
    state.w[1, :] = 1e10  # large transient excursion, not divergence
    assert not simulation.detect_divergence(state)


def test_steady_state_nmsd_windows():
    spec = make_spec()
    result = simulation.monte_carlo(spec.with_overrides(horizon=100, realizations=2), workers=1)
    constant = simulation.SimulationResult(
        nmsd_linear=np.full(50, 0.01), nmsd_db=np.full(50, -20.0), node_msd=None,
        diverged_fraction=0.0, diverged_count=0, realizations=1, steady_state_db=None,
        multiplications=0, realization_iterations=0)
    assert simulation.steady_state_nmsd(constant) == pytest.approx(-20.0, abs=1e-12)
    assert simulation.steady_state_nmsd(constant, fraction=1.0) == pytest.approx(-20.0, abs=1e-12)
    whole = simulation.steady_state_nmsd(result, fraction=1.0)
    assert whole == pytest.approx(float(theory.to_db(result.nmsd_linear.mean())), abs=1e-12)
    for bad in (0.0, -0.2, 1.01):
        with pytest.raises(ValueError, match="fraction"):
            simulation.steady_state_nmsd(result, fraction=bad)


def test_node_curves_average_to_network_curve():
    spec = make_spec(realizations=4, horizon=120)
    result = simulation.monte_carlo(spec, workers=1, node_curves=True)
    assert result.node_msd.shape == (120, 3)
    np.testing.assert_allclose(result.node_msd.mean(axis=1), result.nmsd_linear, rtol=0, atol=0)


def test_multiplication_tally_matches_expectation():
    from difflms import cost

    spec = make_spec(realizations=20, horizon=501, p_zeta=0.5)
    result = simulation.monte_carlo(spec, workers=1)
    expected = cost.network_expected(spec.topology, spec.filter_length, spec.p_zeta)
    assert result.realization_iterations == 20 * 500
    assert result.multiplications_per_iteration == pytest.approx(expected, rel=0.02)


def test_divergence_statistics_only_mode():
    spec = make_spec(realizations=3, horizon=80)
    result = simulation.monte_carlo(spec, workers=1, record_curves=False)
    assert result.nmsd_linear.size == 0
    assert result.diverged_fraction == 0.0
    assert result.realization_iterations == 3 * 79


def test_large_step_long_filter_diverges_quickly_without_cooperation():
    # mu = 0.1 with M = 100 sits far above the 2/((M+2) sigma_u2) bound;
    # isolated nodes must blow up well before 10^4 iterations.
    spec = make_spec(
        rule="non-cooperative", mu=0.1, filter_length=100,
        optimal_system=scenario.generate_optimal_system(100, seed=11),
        realizations=5, horizon=10_001)
    result = simulation.monte_carlo(spec, workers=1, record_curves=False)
    assert result.diverged_fraction == 1.0


def test_metropolis_small_step_matches_exact_model():
    # 20-node network, mu = 0.01, M = 10, full sampling: the Monte Carlo
    # steady state lands within 0.5 dB of the exact model.
    from difflms import presets

    spec = presets.preset_spec("scenario2").with_overrides(
        realizations=500, horizon=5_000, master_seed=424_242)
    result = simulation.monte_carlo(spec)
    steady = theory.exact_steady_state(spec)
    assert result.diverged_fraction == 0.0
    assert abs(result.steady_state_db - steady.db) < 0.5
