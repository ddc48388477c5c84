"""Mean-square models for ATC diffusion LMS under Bernoulli node sampling.

The transient is driven by the V^2 x V^2 recursion

    beta(n) = Phi beta(n-1) + mu^2 p_zeta M sigma_u^2 sigma,

where beta stacks the deviation cross-moments E{w~_i^T w~_j} in
column-major order ((i, j) sits at position i + j*V, 0-based), Phi is the
Hadamard product of a combination factor Gamma = (C (x) C)^T and an
adaptation factor Omega built from the moment coefficients theta and tau,
and sigma = vec(C^T R_v C) aggregates the noise seen through the
combination step.  NMSD(n) = b^T beta(n) / V with b = vec(I).

Stability is governed by the spectral radius rho(Phi); steady states come
from the linear solve (I - Phi) x = sigma, never an explicit inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotStableError, NumericalFailureError
from .scenario import ScenarioSpec

# rho this close to 1 is reported as "marginal" rather than calling it.
STABILITY_BAND = 1e-9

# Dense eigensolve up to this matrix dimension; power iteration beyond.
_DENSE_EIG_LIMIT = 4096
_POWER_TOL = 1e-8
_POWER_MAX_ITER = 100_000

# Transient iterates beyond this magnitude are truncated as unstable.
_OVERFLOW_LIMIT = 1e300


@dataclass(frozen=True)
class MomentCoefficients:
    """Second-order adaptation coefficients.

    ``theta`` scales same-node mean-square terms and carries the Gaussian
    fourth-moment factor (M + 2); ``tau`` scales cross-node terms.
    Always tau <= theta, with equality only at p_zeta = 0.
    """

    theta: float
    tau: float


@dataclass(frozen=True)
class ModelMatrices:
    """The Gamma/Omega/Phi/sigma/b quintet used by the exact recursion."""

    gamma: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    sigma_vec: np.ndarray
    b_vec: np.ndarray


@dataclass(frozen=True)
class SteadyState:
    """A steady-state NMSD, carried in linear and dB form."""

    linear: float
    db: float


@dataclass(frozen=True)
class TheoryCurve:
    """Predicted NMSD transient.

    ``spectral_radius`` is the contraction factor of the model that
    produced the curve (rho(Phi) for the exact model, tau for the
    cooperative approximation, theta for the non-cooperative closed form).
    ``steady_state`` is present only when that factor is below one;
    ``truncated`` is set when the iterates overflowed before the requested
    length was reached.
    """

    nmsd_linear: np.ndarray
    nmsd_db: np.ndarray
    spectral_radius: float
    steady_state: SteadyState | None
    truncated: bool = False


def to_db(linear) -> np.ndarray | float:
    """Power ratio to decibels; zero maps to -inf without warnings."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(linear)


def _steady(linear: float) -> SteadyState:
    return SteadyState(linear=float(linear), db=float(to_db(linear)))


def moment_coefficients(mu: float, p_zeta: float, sigma_u2: float, filter_length: int) -> MomentCoefficients:
    """theta and tau for the given step size, sampling probability, and input power."""
    if mu <= 0.0 or sigma_u2 <= 0.0 or filter_length < 1 or not 0.0 <= p_zeta <= 1.0:
        raise ValueError("need mu > 0, sigma_u2 > 0, filter_length >= 1, p_zeta in [0, 1]")
    common = 1.0 - 2.0 * mu * p_zeta * sigma_u2
    theta = common + mu**2 * p_zeta * sigma_u2**2 * (filter_length + 2)
    tau = common + mu**2 * p_zeta**2 * sigma_u2**2
    return MomentCoefficients(theta=theta, tau=tau)


def build_gamma(combination: np.ndarray) -> np.ndarray:
    """Gamma = (C (x) C)^T; right-stochastic whenever C is left-stochastic."""
    return np.kron(combination, combination).T.copy()


def build_omega(coeff: MomentCoefficients, node_count: int) -> np.ndarray:
    """Constant-column matrix: theta on the columns of diagonal beta entries, tau elsewhere."""
    size = node_count * node_count
    omega = np.full((size, size), coeff.tau)
    omega[:, np.arange(node_count) * (node_count + 1)] = coeff.theta
    return omega


def build_phi(gamma: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Phi = Omega (Hadamard) Gamma."""
    return omega * gamma


def build_sigma(combination: np.ndarray, noise_variances: np.ndarray) -> np.ndarray:
    """sigma = vec(C^T R_v C): entry (j, l) is sum_z c_zj c_zl sigma_vz^2."""
    noise_variances = np.asarray(noise_variances, dtype=float)
    quad = combination.T @ (noise_variances[:, np.newaxis] * combination)
    return quad.ravel(order="F").copy()


def b_vec(node_count: int) -> np.ndarray:
    """vec(I_V): selects the diagonal beta entries (the per-node MSDs)."""
    return np.eye(node_count).ravel(order="F").copy()


def model_matrices(spec: ScenarioSpec) -> ModelMatrices:
    """Assemble the full matrix set for a scenario."""
    combination = spec.combination_matrix()
    coeff = moment_coefficients(spec.mu, spec.p_zeta, spec.sigma_u2, spec.filter_length)
    gamma = build_gamma(combination)
    omega = build_omega(coeff, spec.node_count)
    return ModelMatrices(
        gamma=gamma,
        omega=omega,
        phi=build_phi(gamma, omega),
        sigma_vec=build_sigma(combination, spec.noise_variances),
        b_vec=b_vec(spec.node_count),
    )


def spectral_radius(matrix: np.ndarray) -> float:
    """Maximum eigenvalue modulus.

    Dense (non-symmetric) eigensolve up to dimension 4096; beyond that,
    power iteration on the entrywise absolute value, which attains the
    radius for the entrywise-nonnegative matrices this toolkit produces.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got shape {matrix.shape}")
    if matrix.shape[0] <= _DENSE_EIG_LIMIT:
        try:
            eigenvalues = np.linalg.eigvals(matrix)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(f"eigenvalue computation failed: {exc}") from exc
        return float(np.abs(eigenvalues).max())
    return _power_iteration_radius(np.abs(matrix))


def _power_iteration_radius(matrix: np.ndarray) -> float:
    dim = matrix.shape[0]
    vector = np.full(dim, 1.0 / dim)
    estimate = 0.0
    for _ in range(_POWER_MAX_ITER):
        image = matrix @ vector
        norm = image.sum()  # 1-norm: entries stay nonnegative
        if norm == 0.0:
            return 0.0
        previous, estimate = estimate, norm
        vector = image / norm
        if abs(estimate - previous) <= _POWER_TOL * max(estimate, np.finfo(float).tiny):
            return float(estimate)
    raise NumericalFailureError(
        f"power iteration did not converge within {_POWER_MAX_ITER} iterations "
        f"(dim={dim}, last estimates {previous:.12e} -> {estimate:.12e})"
    )


def classify_stability(rho: float) -> str:
    """'stable' / 'unstable' with a +-1e-9 'marginal' band around rho = 1."""
    if rho < 1.0 - STABILITY_BAND:
        return "stable"
    if rho > 1.0 + STABILITY_BAND:
        return "unstable"
    return "marginal"


def _drive_constant(spec: ScenarioSpec) -> float:
    return spec.mu**2 * spec.p_zeta * spec.filter_length * spec.sigma_u2


def exact_nmsd_curve(spec: ScenarioSpec, n_iterations: int | None = None) -> TheoryCurve:
    """Iterate the exact beta recursion from beta(0) = ||w_o||^2 * 1.

    When rho(Phi) >= 1 the iterates grow; the curve is truncated at the
    first overflow and flagged instead of raising.
    """
    n = spec.horizon if n_iterations is None else int(n_iterations)
    if n < 1:
        raise ValueError("need at least one iteration")
    matrices = model_matrices(spec)
    rho = spectral_radius(matrices.phi)
    drive = _drive_constant(spec) * matrices.sigma_vec
    beta = np.full(spec.node_count**2, float(np.dot(spec.optimal_system, spec.optimal_system)))
    scale = 1.0 / spec.node_count
    curve = np.empty(n)
    curve[0] = scale * (matrices.b_vec @ beta)
    truncated = False
    for i in range(1, n):
        beta = matrices.phi @ beta + drive
        value = scale * (matrices.b_vec @ beta)
        if not np.isfinite(value) or value > _OVERFLOW_LIMIT:
            curve = curve[:i]
            truncated = True
            break
        curve[i] = value
    steady = None
    if classify_stability(rho) == "stable":
        steady = _exact_steady(spec, matrices, rho)
    return TheoryCurve(
        nmsd_linear=curve,
        nmsd_db=to_db(curve),
        spectral_radius=rho,
        steady_state=steady,
        truncated=truncated,
    )


def exact_steady_state(spec: ScenarioSpec) -> SteadyState:
    """Limit of the exact recursion: (mu^2 p M sigma_u^2 / V) b^T (I - Phi)^{-1} sigma."""
    matrices = model_matrices(spec)
    return _exact_steady(spec, matrices, spectral_radius(matrices.phi))


def _exact_steady(spec: ScenarioSpec, matrices: ModelMatrices, rho: float) -> SteadyState:
    if classify_stability(rho) != "stable":
        raise NotStableError(f"spectral radius rho(Phi) = {rho:.9f} is not below 1")
    size = matrices.phi.shape[0]
    try:
        solution = np.linalg.solve(np.eye(size) - matrices.phi, matrices.sigma_vec)
    except np.linalg.LinAlgError as exc:
        raise NotStableError(f"(I - Phi) solve failed near instability: {exc}") from exc
    value = _drive_constant(spec) / spec.node_count * (matrices.b_vec @ solution)
    return _steady(value)


def approx_nmsd_curve(spec: ScenarioSpec, n_iterations: int | None = None) -> TheoryCurve:
    """Cooperative approximation Phi ~ tau * Gamma.

    NMSD_tau(n) = ||w_o||^2 tau^n
                  + (mu^2 p M sigma_u^2 / V) b^T [sum_{i<n} (tau Gamma)^i] sigma,
    evaluated with a running matrix-vector sum, so no inverse is needed for
    the transient.  Meaningful for the cooperative rules; with C = I it
    degenerates to tau-only decay.
    """
    n = spec.horizon if n_iterations is None else int(n_iterations)
    if n < 1:
        raise ValueError("need at least one iteration")
    combination = spec.combination_matrix()
    coeff = moment_coefficients(spec.mu, spec.p_zeta, spec.sigma_u2, spec.filter_length)
    gamma = build_gamma(combination)
    sigma_vec = build_sigma(combination, spec.noise_variances)
    b = b_vec(spec.node_count)
    w_norm2 = float(np.dot(spec.optimal_system, spec.optimal_system))
    scale = _drive_constant(spec) / spec.node_count
    curve = np.empty(n)
    curve[0] = w_norm2
    running = np.zeros_like(sigma_vec)  # sum_{i<n} (tau Gamma)^i sigma
    tau_pow = 1.0
    truncated = False
    for i in range(1, n):
        running = sigma_vec + coeff.tau * (gamma @ running)
        tau_pow *= coeff.tau
        value = w_norm2 * tau_pow + scale * (b @ running)
        if not np.isfinite(value) or value > _OVERFLOW_LIMIT:
            curve = curve[:i]
            truncated = True
            break
        curve[i] = value
    steady = approx_steady_state(spec) if coeff.tau < 1.0 else None
    return TheoryCurve(
        nmsd_linear=curve,
        nmsd_db=to_db(curve),
        spectral_radius=coeff.tau,
        steady_state=steady,
        truncated=truncated,
    )


def approx_steady_state(spec: ScenarioSpec) -> SteadyState:
    """Limit of the tau-approximation: (mu^2 p M sigma_u^2 / V) b^T (I - tau Gamma)^{-1} sigma."""
    coeff = moment_coefficients(spec.mu, spec.p_zeta, spec.sigma_u2, spec.filter_length)
    if coeff.tau >= 1.0:
        raise NotStableError(f"tau = {coeff.tau:.9f} is not below 1; no steady state")
    combination = spec.combination_matrix()
    gamma = build_gamma(combination)
    sigma_vec = build_sigma(combination, spec.noise_variances)
    size = gamma.shape[0]
    solution = np.linalg.solve(np.eye(size) - coeff.tau * gamma, sigma_vec)
    value = _drive_constant(spec) / spec.node_count * (b_vec(spec.node_count) @ solution)
    return _steady(value)


def noncoop_closed_form(spec: ScenarioSpec, n_iterations: int | None = None) -> TheoryCurve:
    """Non-cooperative model: NMSD(n) = (||w_o||^2 - chi_nc) theta^n + chi_nc.

    Evaluated through the underlying scalar recursion, which is exact for
    any theta (including theta >= 1, where no steady state exists, and
    p_zeta = 0, where the curve is constant at ||w_o||^2).
    """
    n = spec.horizon if n_iterations is None else int(n_iterations)
    if n < 1:
        raise ValueError("need at least one iteration")
    coeff = moment_coefficients(spec.mu, spec.p_zeta, spec.sigma_u2, spec.filter_length)
    drive = _drive_constant(spec) * float(spec.noise_variances.mean())
    curve = np.empty(n)
    value = float(np.dot(spec.optimal_system, spec.optimal_system))
    curve[0] = value
    truncated = False
    for i in range(1, n):
        value = coeff.theta * value + drive
        if not np.isfinite(value) or value > _OVERFLOW_LIMIT:
            curve = curve[:i]
            truncated = True
            break
        curve[i] = value
    steady = None
    if coeff.theta < 1.0:
        steady = noncoop_steady_state(spec)
    return TheoryCurve(
        nmsd_linear=curve,
        nmsd_db=to_db(curve),
        spectral_radius=coeff.theta,
        steady_state=steady,
        truncated=truncated,
    )


def noncoop_steady_state(spec: ScenarioSpec) -> SteadyState:
    """chi_nc = mu M / (2 - mu sigma_u2 (M+2)) * mean(sigma_v^2); no p_zeta dependence."""
    coeff = moment_coefficients(spec.mu, spec.p_zeta, spec.sigma_u2, spec.filter_length)
    if coeff.theta >= 1.0:
        raise NotStableError(f"theta = {coeff.theta:.9f} is not below 1; no steady state")
    denominator = 2.0 - spec.mu * spec.sigma_u2 * (spec.filter_length + 2)
    value = spec.mu * spec.filter_length / denominator * float(spec.noise_variances.mean())
    return _steady(value)


def chi_lms(mu: float, filter_length: int, sigma_u2: float, sigma_v2: float) -> float:
    """Small-step-size steady-state MSD of a single LMS filter (linear scale)."""
    denominator = 2.0 - mu * sigma_u2 * (filter_length + 2)
    if denominator <= 0.0:
        raise NotStableError("step size too large for a stable LMS filter")
    return mu * filter_length * sigma_v2 / denominator


def kv_closed_form(
    node_count: int,
    mu: float,
    p_zeta: float,
    sigma_u2: float,
    filter_length: int,
    noise_variances,
) -> SteadyState:
    """Complete-graph steady state: chi_KV = mu M / (2 - mu p sigma_u^2) * sum(sigma_v^2) / V^2.

    Holds for the uniform/Metropolis weights on K_V (they coincide there).
    Strictly increasing in p_zeta.
    """
    noise_variances = np.asarray(noise_variances, dtype=float)
    if node_count < 1 or noise_variances.shape != (node_count,):
        raise ValueError("noise_variances must carry one entry per node")
    if not 0.0 < p_zeta <= 1.0:
        raise ValueError(f"p_zeta must lie in (0, 1], got {p_zeta}")
    if mu * p_zeta * sigma_u2 >= 2.0:
        raise ValueError(f"need mu * p_zeta * sigma_u2 < 2, got {mu * p_zeta * sigma_u2}")
    value = mu * filter_length / (2.0 - mu * p_zeta * sigma_u2) * noise_variances.sum() / node_count**2
    return _steady(value)


def sync_async_relation(async_steady_linear: float, p_zeta: float) -> float:
    """Steady state after replacing (mu, p_zeta) by (mu * p_zeta, 1) on K_V.

    The synchronous network with the adjusted step size lands at p_zeta
    times the asynchronous steady state (linear scale).
    """
    if not 0.0 < p_zeta <= 1.0:
        raise ValueError(f"p_zeta must lie in (0, 1], got {p_zeta}")
    return p_zeta * async_steady_linear


def mean_stability_bound(sigma_u2: float, filter_length: int) -> float:
    """Largest step size with theta < 1 for any p_zeta > 0: 2 / ((M+2) sigma_u^2)."""
    if sigma_u2 <= 0.0 or filter_length < 1:
        raise ValueError("need sigma_u2 > 0 and filter_length >= 1")
    return 2.0 / ((filter_length + 2) * sigma_u2)


def stability_sweep(spec: ScenarioSpec, p_zeta_grid) -> list[tuple[float, float]]:
    """rho(Phi) over a grid of sampling probabilities; Gamma is built once."""
    grid = [float(p) for p in p_zeta_grid]
    if not grid:
        raise ValueError("p_zeta grid must not be empty")
    if any(not 0.0 <= p <= 1.0 for p in grid):
        raise ValueError("p_zeta grid values must lie in [0, 1]")
    combination = spec.combination_matrix()
    gamma = build_gamma(combination)
    results = []
    for p in grid:
        coeff = moment_coefficients(spec.mu, p, spec.sigma_u2, spec.filter_length)
        phi = build_phi(gamma, build_omega(coeff, spec.node_count))
        results.append((p, spectral_radius(phi)))
    return results
