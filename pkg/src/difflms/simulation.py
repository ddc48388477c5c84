"""Monte Carlo simulation of ATC diffusion LMS with Bernoulli node sampling.

Per iteration every node draws a fresh white-Gaussian input sample and
measurement noise, flips its sampling coin, adapts its local estimate only
when sampled, and then combines its neighbors' local estimates
unconditionally.  Realizations are averaged into an NMSD curve; diverged
realizations are excluded from the average and counted separately.

Randomness contract: realization ``i`` of a scenario with master seed ``s``
draws from three PCG64 generators spawned in order (input, noise,
sampling) from ``SeedSequence([s, i])``.  Each stream is consumed in
iteration-major, node-minor order, which makes results independent of
batching, chunking, and worker count.  The batched engine integrates the
deviation ``w_o - w_k`` directly (an exact reformulation of the update);
:func:`step` is the plain estimate-space reference used to cross-check it.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import ceil
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .scenario import ScenarioSpec
from .theory import to_db

WORKERS_ENV = "DIFFLMS_WORKERS"

# ||w_k||^2 beyond this flags the realization as diverged well before floats
# overflow.  The value balances two failure modes at step sizes far above the
# individual-node stability bound: mean-square-stable networks make rare
# transient excursions beyond 1e17 that must not be clipped, while barely
# unstable ones (rho just above 1) grow slowly and must still cross the
# guard within a practical horizon.
DIVERGENCE_GUARD = 1e100

_CHUNK = 512


class RealizationStreams(NamedTuple):
    """The three per-realization generators, in their fixed spawn order."""

    input: np.random.Generator
    noise: np.random.Generator
    sampling: np.random.Generator


def realization_streams(master_seed: int, realization_index: int) -> RealizationStreams:
    """Derive the (input, noise, sampling) streams for one realization."""
    if master_seed < 0 or realization_index < 0:
        raise ValueError("master_seed and realization_index must be non-negative")
    children = np.random.SeedSequence([master_seed, realization_index]).spawn(3)
    return RealizationStreams(*(np.random.default_rng(child) for child in children))


@dataclass
class RealizationState:
    """Mutable per-realization state: estimates and regressor delay lines.

    ``u_buf[k]`` holds the last M input samples of node k, newest first;
    delay lines start zero-filled, so the first M iterations run on
    partially filled regressors.
    """

    w: np.ndarray
    psi: np.ndarray
    u_buf: np.ndarray
    iteration: int = 0
    diverged: bool = False


def initial_state(spec: ScenarioSpec) -> RealizationState:
    """All-zero estimates and delay lines (w_k(0) = 0)."""
    shape = (spec.node_count, spec.filter_length)
    return RealizationState(w=np.zeros(shape), psi=np.zeros(shape), u_buf=np.zeros(shape))


def detect_divergence(state: RealizationState) -> bool:
    """True iff any estimate entry is non-finite or some ||w_k||^2 exceeds the guard."""
    if not np.isfinite(state.w).all():
        return True
    norms = np.einsum("km,km->k", state.w, state.w)
    return bool((norms > DIVERGENCE_GUARD).any())


def step(
    state: RealizationState,
    spec: ScenarioSpec,
    streams: RealizationStreams,
    combination: np.ndarray | None = None,
) -> RealizationState:
    """One adapt-then-combine iteration, textbook form.

    Sampled nodes run the LMS update; unsampled nodes pass their previous
    combined estimate through as the local estimate.  The combination step
    runs at every node every iteration.  Non-finite values mark the state
    diverged instead of raising; the flag latches.
    """
    if combination is None:
        combination = spec.combination_matrix()
    u_new = streams.input.standard_normal(spec.node_count) * np.sqrt(spec.sigma_u2)
    noise = streams.noise.standard_normal(spec.node_count) * np.sqrt(spec.noise_variances)
    zeta = streams.sampling.random(spec.node_count) < spec.p_zeta

    buf = state.u_buf
    buf[:, 1:] = buf[:, :-1]
    buf[:, 0] = u_new
    with np.errstate(over="ignore", invalid="ignore"):
        desired = buf @ spec.optimal_system + noise
        error = desired - np.einsum("km,km->k", buf, state.w)
        state.psi[:] = state.w + spec.mu * (zeta * error)[:, np.newaxis] * buf
        state.w[:] = combination.T @ state.psi
    state.iteration += 1
    if not state.diverged and detect_divergence(state):
        state.diverged = True
    return state


@dataclass
class RealizationResult:
    """Per-iteration squared deviations ||w_o - w_k(n)||^2 of one realization.

    ``squared_deviations`` has shape (horizon, V); entries from the
    divergence iteration onward are NaN when ``diverged`` is set.
    """

    squared_deviations: np.ndarray
    diverged: bool
    diverged_at: int | None


def run_realization(spec: ScenarioSpec, realization_index: int) -> RealizationResult:
    """Simulate a single realization, deterministic in (master_seed, index)."""
    batch = _simulate_batch(spec, [realization_index], record="node")
    diverged = bool(batch.diverged[0])
    return RealizationResult(
        squared_deviations=batch.curves[0],
        diverged=diverged,
        diverged_at=int(batch.diverged_at[0]) if diverged else None,
    )


@dataclass(frozen=True)
class SimulationResult:
    """Monte Carlo aggregate over the non-diverged realizations.

    ``nmsd_linear``/``nmsd_db`` are empty when every realization diverged.
    ``multiplications`` tallies the multiplications actually spent
    (adaptation lines only when sampled, combination always) over
    ``realization_iterations`` executed realization-iterations.
    """

    nmsd_linear: np.ndarray
    nmsd_db: np.ndarray
    node_msd: np.ndarray | None
    diverged_fraction: float
    diverged_count: int
    realizations: int
    steady_state_db: float | None
    multiplications: int
    realization_iterations: int

    @property
    def multiplications_per_iteration(self) -> float:
        """Empirical network cost per iteration (the Table-style average)."""
        if self.realization_iterations == 0:
            return float("nan")
        return self.multiplications / self.realization_iterations


def steady_state_nmsd(result: SimulationResult, fraction: float = 0.2) -> float:
    """Mean of the final ``fraction`` of the linear curve, in dB."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    curve = result.nmsd_linear
    if curve.size == 0:
        raise ValueError("cannot estimate a steady state from an empty curve")
    window = ceil(fraction * curve.size)
    return float(to_db(curve[-window:].mean()))


def resolve_workers(workers: int | None = None) -> int:
    """Explicit argument, else the DIFFLMS_WORKERS variable, else machine parallelism."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def monte_carlo(
    spec: ScenarioSpec,
    workers: int | None = None,
    record_curves: bool = True,
    node_curves: bool = False,
) -> SimulationResult:
    """Average ``spec.realizations`` independent realizations into an NMSD curve.

    Realizations are partitioned into contiguous blocks executed batchwise
    (concurrently across worker processes when ``workers`` > 1); the merge
    is by realization index, so the result does not depend on the worker
    count or schedule.  ``record_curves=False`` skips curve recording and
    only collects divergence and cost statistics; ``node_curves=True``
    additionally keeps the per-node MSD curve (memory: horizon x V).
    """
    total = spec.realizations
    record = "node" if node_curves else ("mean" if record_curves else None)
    n_workers = min(resolve_workers(workers), total)
    blocks = [block for block in np.array_split(np.arange(total), n_workers) if block.size]
    if len(blocks) == 1:
        batches = [_simulate_batch(spec, blocks[0], record)]
    else:
        with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
            futures = [pool.submit(_simulate_batch, spec, block, record) for block in blocks]
            batches = [future.result() for future in futures]

    diverged = np.concatenate([batch.diverged for batch in batches])
    diverged_count = int(diverged.sum())
    valid = ~diverged

    neighborhood_total = int(spec.topology.neighborhood_sizes().sum())
    multiplications = 0
    realization_iterations = 0
    for batch, block in zip(batches, blocks):
        multiplications += int(batch.zeta_total.sum()) * (2 * spec.filter_length + 1)
        multiplications += block.size * batch.steps_executed * spec.filter_length * neighborhood_total
        realization_iterations += block.size * batch.steps_executed

    nmsd_linear = np.empty(0)
    node_msd = None
    if record is not None:
        curves = np.concatenate([batch.curves for batch in batches], axis=0)
        if valid.any():
            if record == "node":
                node_msd = curves[valid].mean(axis=0)
                nmsd_linear = node_msd.mean(axis=1)
            else:
                nmsd_linear = curves[valid].mean(axis=0)

    steady_state_db = None
    if nmsd_linear.size:
        window = ceil(0.2 * nmsd_linear.size)
        steady_state_db = float(to_db(nmsd_linear[-window:].mean()))
    return SimulationResult(
        nmsd_linear=nmsd_linear,
        nmsd_db=to_db(nmsd_linear) if nmsd_linear.size else np.empty(0),
        node_msd=node_msd,
        diverged_fraction=diverged_count / total,
        diverged_count=diverged_count,
        realizations=total,
        steady_state_db=steady_state_db,
        multiplications=multiplications,
        realization_iterations=realization_iterations,
    )


@dataclass
class _BatchResult:
    curves: np.ndarray | None
    diverged: np.ndarray
    diverged_at: np.ndarray
    zeta_total: np.ndarray
    steps_executed: int


def _simulate_batch(spec: ScenarioSpec, indices, record: str | None) -> _BatchResult:
    """Run a batch of realizations in lockstep.

    State is kept in deviation coordinates (w_o - w), which removes the
    desired-signal computation from the loop; the recorded squared
    deviations are then direct norms of the state.  Regressors are
    realized as a negative-stride window over the per-chunk input history,
    so no delay-line shifting is needed.
    """
    batch = len(indices)
    nodes, taps, horizon = spec.node_count, spec.filter_length, spec.horizon
    combination_t = np.ascontiguousarray(spec.combination_matrix().T)
    w_o = spec.optimal_system
    w_norm2 = float(np.dot(w_o, w_o))
    sigma_u = float(np.sqrt(spec.sigma_u2))
    noise_scale = np.sqrt(spec.noise_variances)
    mu, p_zeta = spec.mu, spec.p_zeta
    streams = [realization_streams(spec.master_seed, int(i)) for i in indices]

    dev = np.tile(w_o, (batch, nodes, 1))  # w~_k(0) = w_o under zero initialization
    psi = np.empty_like(dev)
    error = np.empty((batch, nodes))
    coeff = np.empty((batch, nodes))
    sq = np.empty((batch, nodes))

    diverged = np.zeros(batch, dtype=bool)
    diverged_at = np.full(batch, -1, dtype=np.int64)
    zeta_total = np.zeros(batch, dtype=np.int64)

    if record == "node":
        curves = np.full((batch, horizon, nodes), np.nan)
        curves[:, 0, :] = w_norm2
    elif record == "mean":
        curves = np.full((batch, horizon), np.nan)
        curves[:, 0] = w_norm2
    else:
        curves = None

    tail = np.zeros((batch, max(taps - 1, 0), nodes))
    steps_total = horizon - 1
    iteration = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, steps_total, _CHUNK):
            span = min(_CHUNK, steps_total - start)
            u_new = np.empty((batch, span, nodes))
            v_chunk = np.empty((batch, span, nodes))
            z_chunk = np.empty((batch, span, nodes))
            for row, stream in enumerate(streams):
                stream.input.standard_normal(out=u_new[row])
                stream.noise.standard_normal(out=v_chunk[row])
                stream.sampling.random(out=z_chunk[row])
            u_new *= sigma_u
            v_chunk *= noise_scale
            zeta = z_chunk < p_zeta
            zeta_total += zeta.sum(axis=(1, 2))

            u_hist = np.concatenate((tail, u_new), axis=1)
            if taps > 1:
                tail = u_hist[:, -(taps - 1):, :].copy()
            s_b, s_t, s_k = u_hist.strides
            regressors = as_strided(
                u_hist[:, taps - 1:, :],
                shape=(batch, span, nodes, taps),
                strides=(s_b, s_t, s_k, -s_t),
            )

            for t in range(span):
                iteration += 1
                u_t = regressors[:, t]
                np.einsum("bkm,bkm->bk", u_t, dev, out=error)
                error += v_chunk[:, t]
                np.multiply(zeta[:, t], error, out=coeff)
                coeff *= -mu
                np.multiply(coeff[:, :, np.newaxis], u_t, out=psi)
                psi += dev
                np.matmul(combination_t, psi, out=dev)
                np.einsum("bkm,bkm->bk", dev, dev, out=sq)
                bad_rows = (~np.isfinite(sq) | (sq > DIVERGENCE_GUARD)).any(axis=1)
                if bad_rows.any():
                    newly = bad_rows & ~diverged
                    if newly.any():
                        diverged_at[newly] = iteration
                        diverged |= newly
                if diverged.any():
                    dev[diverged] = 0.0  # keep dead rows finite; they are excluded anyway
                if record == "node":
                    curves[:, iteration, :] = sq
                    if diverged.any():
                        curves[diverged, iteration, :] = np.nan
                elif record == "mean":
                    curves[:, iteration] = sq.mean(axis=1)
                    if diverged.any():
                        curves[diverged, iteration] = np.nan
                if diverged.all():
                    zeta_total -= zeta[:, t + 1:, :].sum(axis=(1, 2))
                    return _BatchResult(curves, diverged, diverged_at, zeta_total, iteration)

    return _BatchResult(curves, diverged, diverged_at, zeta_total, iteration)
