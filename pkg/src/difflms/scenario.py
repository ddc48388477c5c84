"""Scenario descriptions: everything needed to reproduce one experiment.

A scenario couples a topology and combination rule with the adaptation
parameters (step size, filter length, sampling probability, signal and
noise statistics) and the Monte Carlo controls (horizon, realizations,
master seed).  Config documents are JSON with the key names documented in
the README; :func:`from_config` resolves ranges and generation seeds into
concrete arrays so a spec is always fully materialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import topology as topo
from . import weights
from .errors import ConfigError

_UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class ScenarioSpec:
    """Fully resolved experiment description.

    ``noise_variances`` has one entry per node and ``optimal_system`` has
    ``filter_length`` entries.  The optional ``*_seed``/``noise_range``
    fields record how those arrays were generated, for metadata echo.
    """

    topology: topo.Topology
    rule: str
    mu: float
    filter_length: int
    p_zeta: float
    sigma_u2: float
    noise_variances: np.ndarray
    optimal_system: np.ndarray
    horizon: int
    realizations: int
    master_seed: int
    noise_range: tuple[float, float] | None = None
    noise_seed: int | None = None
    optimal_system_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "noise_variances", _frozen_array(self.noise_variances))
        object.__setattr__(self, "optimal_system", _frozen_array(self.optimal_system))

    @property
    def node_count(self) -> int:
        return self.topology.node_count

    def combination_matrix(self) -> np.ndarray:
        return weights.build(self.rule, self.topology)

    def with_overrides(self, **changes) -> "ScenarioSpec":
        return replace(self, **changes)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


def generate_optimal_system(filter_length: int, seed: int) -> np.ndarray:
    """Unit-norm system with coefficients drawn uniformly from [-1, 1]."""
    if filter_length < 1:
        raise ValueError("filter_length must be at least 1")
    rng = np.random.default_rng(seed)
    while True:
        coeffs = rng.uniform(-1.0, 1.0, size=filter_length)
        norm = np.linalg.norm(coeffs)
        if norm > 0.0:
            return coeffs / norm


def generate_noise_profile(node_count: int, low: float, high: float, seed: int) -> np.ndarray:
    """Per-node noise variances drawn uniformly from [low, high]."""
    if not 0.0 < low <= high:
        raise ValueError("noise range must satisfy 0 < low <= high")
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, size=node_count)


def from_config(doc: dict, base_dir=None) -> ScenarioSpec:
    """Build a spec from a parsed config document, resolving seeds and paths.

    ``topology`` may be an inline edge-list document or a file path
    (relative paths resolve against ``base_dir``).  Noise comes either from
    ``noise_variances`` or from ``noise_range`` + ``noise_seed``; the
    optimal system from ``optimal_system`` or ``optimal_system_seed``
    (defaulting to ``master_seed`` when neither is present).
    """
    if not isinstance(doc, dict):
        raise ConfigError("scenario config must be a mapping")
    try:
        mu = float(doc["mu"])
        filter_length = int(doc["filter_length"])
        p_zeta = float(doc["p_zeta"])
        sigma_u2 = float(doc["sigma_u2"])
        rule = str(doc["rule"])
        horizon = int(doc["horizon"])
        realizations = int(doc["realizations"])
        master_seed = int(doc["master_seed"])
    except KeyError as exc:
        raise ConfigError(f"missing required config key: {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from None

    topology = _resolve_topology(doc.get("topology"), base_dir)
    node_count = topology.node_count

    noise_range = None
    noise_seed = None
    if "noise_variances" in doc:
        noise_variances = np.asarray(doc["noise_variances"], dtype=float)
    elif "noise_range" in doc:
        lo_hi = doc["noise_range"]
        if not isinstance(lo_hi, (list, tuple)) or len(lo_hi) != 2:
            raise ConfigError("noise_range must be a [low, high] pair")
        noise_range = (float(lo_hi[0]), float(lo_hi[1]))
        noise_seed = int(doc.get("noise_seed", master_seed))
        try:
            noise_variances = generate_noise_profile(node_count, *noise_range, noise_seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        raise ConfigError("config must provide noise_variances or noise_range")

    optimal_system_seed = None
    if "optimal_system" in doc:
        optimal_system = np.asarray(doc["optimal_system"], dtype=float)
    else:
        optimal_system_seed = int(doc.get("optimal_system_seed", master_seed))
        optimal_system = generate_optimal_system(filter_length, optimal_system_seed)

    spec = ScenarioSpec(
        topology=topology,
        rule=rule,
        mu=mu,
        filter_length=filter_length,
        p_zeta=p_zeta,
        sigma_u2=sigma_u2,
        noise_variances=noise_variances,
        optimal_system=optimal_system,
        horizon=horizon,
        realizations=realizations,
        master_seed=master_seed,
        noise_range=noise_range,
        noise_seed=noise_seed,
        optimal_system_seed=optimal_system_seed,
    )
    errors, _ = validate_spec(spec)
    if errors:
        raise ConfigError("; ".join(errors))
    return spec


def _resolve_topology(entry, base_dir) -> topo.Topology:
    if isinstance(entry, dict):
        try:
            return topo.from_document(entry)
        except topo.TopologyFormatError as exc:
            raise ConfigError(f"inline topology: {exc}") from None
    if isinstance(entry, str):
        path = Path(entry)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        try:
            return topo.load(path)
        except FileNotFoundError:
            raise ConfigError(f"topology file not found: {path}") from None
        except topo.TopologyFormatError as exc:
            raise ConfigError(f"topology file {path}: {exc}") from None
    raise ConfigError("config must provide a topology (inline document or file path)")


def load_config(path) -> ScenarioSpec:
    """Read a JSON config file and build the spec it describes."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return from_config(doc, base_dir=path.parent)


def to_config(spec: ScenarioSpec) -> dict:
    """Fully resolved config document; feeding it back reproduces the run."""
    doc = {
        "mu": spec.mu,
        "filter_length": spec.filter_length,
        "p_zeta": spec.p_zeta,
        "sigma_u2": spec.sigma_u2,
        "rule": spec.rule,
        "horizon": spec.horizon,
        "realizations": spec.realizations,
        "master_seed": spec.master_seed,
        "noise_variances": [float(v) for v in spec.noise_variances],
        "optimal_system": [float(v) for v in spec.optimal_system],
        "topology": topo.to_document(spec.topology),
    }
    if spec.noise_range is not None:
        doc["noise_range"] = list(spec.noise_range)
        doc["noise_seed"] = spec.noise_seed
    if spec.optimal_system_seed is not None:
        doc["optimal_system_seed"] = spec.optimal_system_seed
    return doc


def validate_spec(spec: ScenarioSpec) -> tuple[list[str], list[str]]:
    """Invariant check: returns (errors, warnings).

    Errors break the scenario contract; warnings flag settings that are
    legal but suspicious (step size beyond the mean-stability bound,
    non-unit optimal system).
    """
    errors: list[str] = []
    warnings: list[str] = []
    if spec.rule not in weights.RULES:
        errors.append(f"unknown combination rule {spec.rule!r}; expected one of {weights.RULES}")
    if not spec.mu > 0.0:
        errors.append(f"mu must be positive, got {spec.mu}")
    if spec.filter_length < 1:
        errors.append(f"filter_length must be at least 1, got {spec.filter_length}")
    if not 0.0 <= spec.p_zeta <= 1.0:
        errors.append(f"p_zeta must lie in [0, 1], got {spec.p_zeta}")
    if not spec.sigma_u2 > 0.0:
        errors.append(f"sigma_u2 must be positive, got {spec.sigma_u2}")
    if spec.noise_variances.shape != (spec.node_count,):
        errors.append(
            f"noise_variances must have one entry per node "
            f"({spec.node_count}), got shape {spec.noise_variances.shape}"
        )
    elif not (np.isfinite(spec.noise_variances).all() and (spec.noise_variances > 0.0).all()):
        errors.append("noise_variances must all be positive and finite")
    if spec.optimal_system.shape != (spec.filter_length,):
        errors.append(
            f"optimal_system must have filter_length ({spec.filter_length}) entries, "
            f"got shape {spec.optimal_system.shape}"
        )
    elif not np.isfinite(spec.optimal_system).all():
        errors.append("optimal_system entries must be finite")
    if spec.horizon < 1:
        errors.append(f"horizon must be at least 1, got {spec.horizon}")
    if spec.realizations < 1:
        errors.append(f"realizations must be at least 1, got {spec.realizations}")
    if spec.master_seed < 0:
        errors.append(f"master_seed must be a non-negative integer, got {spec.master_seed}")

    if not errors:
        report = weights.validate(spec.combination_matrix(), spec.topology)
        if report is not None:
            errors.append(f"combination matrix violates its constraints: {report}")
        bound = 2.0 / ((spec.filter_length + 2) * spec.sigma_u2)
        if spec.mu >= bound:
            warnings.append(
                f"mu = {spec.mu:g} is at or above the mean-stability bound "
                f"2/((M+2)*sigma_u2) = {bound:.6g}; expect divergence unless "
                f"cooperation stabilizes the network"
            )
        norm = float(np.linalg.norm(spec.optimal_system))
        if abs(norm - 1.0) > _UNIT_NORM_TOL:
            warnings.append(f"optimal_system norm is {norm:.12f}; the toolkit convention is unit norm")
    return errors, warnings
