"""Batch command-line front end.

Loads scenario configs (JSON files or the scenario1..scenario4 presets),
runs the simulator and/or the theoretical models, and writes
machine-readable outputs: a CSV table per command plus a JSON summary.
Identical invocations produce byte-identical files apart from the
``created_at`` timestamp in the JSON metadata.

Exit codes: 0 success, 1 config error, 2 numerical failure, 3 instability
in a mode that requires stability.
"""

from __future__ import annotations

import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import click

from . import __version__, cost, presets, simulation, theory
from .errors import ConfigError, NotStableError, NumericalFailureError
from .scenario import ScenarioSpec, load_config, to_config, validate_spec

_RNG_CONTRACT = (
    "pcg64; per-realization streams spawned from SeedSequence([master_seed, index]) "
    "in order (input, noise, sampling)"
)

_MODEL_SETS = {
    "sim": {"sim"},
    "exact": {"exact"},
    "approx": {"approx"},
    "closed": {"closed"},
    "all": {"sim", "exact", "approx", "closed"},
    "theory-only": {"exact", "approx", "closed"},
}

_EXIT_CONFIG = 1
_EXIT_NUMERICAL = 2
_EXIT_UNSTABLE = 3


def _fail(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _resolve_config(config_ref: str) -> ScenarioSpec:
    if config_ref in presets.PRESET_NAMES:
        from .scenario import from_config

        return from_config(presets.preset_config(config_ref))
    path = Path(config_ref)
    if not path.exists():
        raise ConfigError(
            f"{config_ref!r} is neither a config file nor a preset name {presets.PRESET_NAMES}"
        )
    return load_config(path)


def _load_spec(config_ref: str, seed: int | None, realizations: int | None) -> ScenarioSpec:
    spec = _resolve_config(config_ref)
    overrides = {}
    if seed is not None:
        overrides["master_seed"] = seed
    if realizations is not None:
        overrides["realizations"] = realizations
    if overrides:
        spec = spec.with_overrides(**overrides)
        errors, _ = validate_spec(spec)
        if errors:
            raise ConfigError("; ".join(errors))
    return spec


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(item) for item in text.split(",") if item.strip() != ""]
    except ValueError:
        raise ConfigError(f"cannot parse p_zeta grid {text!r}") from None
    if not grid:
        raise ConfigError("p_zeta grid must not be empty")
    if any(not 0.0 <= p <= 1.0 for p in grid):
        raise ConfigError("p_zeta grid values must lie in [0, 1]")
    return grid


def _fmt(value) -> str:
    """CSV cell: 6 significant digits, empty for missing."""
    if value is None:
        return ""
    return f"{value:.6g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) if not isinstance(cell, str) else cell for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _json_safe(value):
    """Replace non-finite floats (degenerate configs) with nulls for strict JSON."""
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(
        json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _metadata(command: str, spec: ScenarioSpec, models, workers: int | None) -> dict:
    return {
        "toolkit": "difflms",
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "command": command,
        "models": sorted(models),
        "rng": _RNG_CONTRACT,
        "workers": workers,
        "scenario": to_config(spec),
    }


def _curve_cells(curve: theory.TheoryCurve | None, horizon: int) -> list:
    cells = [None] * horizon
    if curve is not None:
        for i, value in enumerate(curve.nmsd_db[:horizon]):
            cells[i] = float(value)
    return cells


def _closed_steady(spec: ScenarioSpec) -> float | None:
    """Closed-form steady state where one exists: chi_nc, or chi_KV on K_V."""
    try:
        if spec.rule == "non-cooperative":
            return theory.noncoop_steady_state(spec).db
        if bool(spec.topology.adjacency.all()):
            return theory.kv_closed_form(
                spec.node_count, spec.mu, spec.p_zeta, spec.sigma_u2,
                spec.filter_length, spec.noise_variances,
            ).db
    except (NotStableError, ValueError):
        return None
    return None


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Diffusion-LMS node-sampling toolkit: seeded simulation and mean-square theory."""


@main.command("run-scenario")
@click.option("--config", "config_ref", required=True,
              help="Scenario config JSON path, or a preset name (scenario1..scenario4).")
@click.option("--models", "models_name", default="all", show_default=True,
              type=click.Choice(sorted(_MODEL_SETS)), help="Which models to evaluate.")
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False), help="Output directory.")
@click.option("--seed", type=int, default=None, help="Override the config's master_seed.")
@click.option("--realizations", type=int, default=None, help="Override the realization count.")
def run_scenario(config_ref, models_name, out_dir, seed, realizations) -> None:
    """Run one scenario and write curve.csv plus summary.json."""
    try:
        spec = _load_spec(config_ref, seed, realizations)
        models = set(_MODEL_SETS[models_name])
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        horizon = spec.horizon

        exact_curve = theory.exact_nmsd_curve(spec) if "exact" in models else None
        approx_curve = None
        if "approx" in models and spec.rule != "non-cooperative":
            approx_curve = theory.approx_nmsd_curve(spec)
        closed_curve = None
        if "closed" in models and spec.rule == "non-cooperative":
            closed_curve = theory.noncoop_closed_form(spec)

        workers = simulation.resolve_workers() if "sim" in models else None
        sim_result = None
        if "sim" in models:
            sim_result = simulation.monte_carlo(spec, workers=workers)

        sim_cells = [None] * horizon
        if sim_result is not None and sim_result.nmsd_db.size:
            sim_cells = [float(v) for v in sim_result.nmsd_db]
        exact_cells = _curve_cells(exact_curve, horizon)
        approx_cells = _curve_cells(approx_curve, horizon)
        closed_cells = _curve_cells(closed_curve, horizon)
        rows = [
            [n, sim_cells[n], exact_cells[n], approx_cells[n], closed_cells[n]]
            for n in range(horizon)
        ]
        _write_csv(
            out / "curve.csv",
            ["iteration", "nmsd_db_sim", "nmsd_db_exact", "nmsd_db_approx", "nmsd_db_closed_form"],
            rows,
        )

        matrices = theory.model_matrices(spec)
        rho = theory.spectral_radius(matrices.phi)
        coeff = theory.moment_coefficients(spec.mu, spec.p_zeta, spec.sigma_u2, spec.filter_length)
        steady = {
            "sim": sim_result.steady_state_db if sim_result is not None else None,
            "exact": exact_curve.steady_state.db
            if exact_curve is not None and exact_curve.steady_state is not None else None,
            "approx": approx_curve.steady_state.db
            if approx_curve is not None and approx_curve.steady_state is not None else None,
            "closed_form": _closed_steady(spec) if "closed" in models else None,
        }
        report = cost.cost_report(
            spec.topology, spec.filter_length, spec.p_zeta,
            empirical_average=sim_result.multiplications_per_iteration if sim_result is not None else None,
        )
        summary = {
            "metadata": _metadata("run-scenario", spec, models, workers),
            "results": {
                "spectral_radius": rho,
                "stability": theory.classify_stability(rho),
                "moment_coefficients": {"theta": coeff.theta, "tau": coeff.tau},
                "mean_stability_bound": theory.mean_stability_bound(spec.sigma_u2, spec.filter_length),
                "steady_state_db": steady,
                "diverged_fraction": sim_result.diverged_fraction if sim_result is not None else None,
                "cost": {
                    "per_node_expected": [float(v) for v in report.per_node_expected],
                    "network_expected": report.network_expected,
                    "savings_expected": report.savings_expected,
                    "empirical_average": report.empirical_average,
                },
            },
        }
        _write_json(out / "summary.json", summary)
        click.echo(f"wrote {out / 'curve.csv'} and {out / 'summary.json'}")
    except ConfigError as exc:
        _fail(_EXIT_CONFIG, str(exc))
    except NumericalFailureError as exc:
        _fail(_EXIT_NUMERICAL, str(exc))


@main.command("sweep-pzeta")
@click.option("--config", "config_ref", required=True,
              help="Scenario config JSON path, or a preset name (scenario1..scenario4).")
@click.option("--pzeta-grid", "grid_text", required=True,
              help="Comma-separated sampling probabilities, e.g. 0.1,0.5,1.")
@click.option("--mode", default="steady-state", show_default=True,
              type=click.Choice(["steady-state", "stability"]))
@click.option("--models", "models_name", default="all", show_default=True,
              type=click.Choice(sorted(_MODEL_SETS)))
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None, help="Override the config's master_seed.")
@click.option("--realizations", type=int, default=None, help="Override the realization count.")
def sweep_pzeta(config_ref, grid_text, mode, models_name, out_dir, seed, realizations) -> None:
    """Evaluate steady states or stability over a grid of sampling probabilities."""
    try:
        spec = _load_spec(config_ref, seed, realizations)
        grid = _parse_grid(grid_text)
        models = set(_MODEL_SETS[models_name])
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        workers = simulation.resolve_workers() if "sim" in models else None

        json_rows = []
        any_stable = False
        for p in grid:
            point = spec.with_overrides(p_zeta=p)
            rho = theory.spectral_radius(theory.model_matrices(point).phi)
            stability = theory.classify_stability(rho)
            any_stable = any_stable or stability == "stable"
            entry: dict = {"p_zeta": p, "rho_phi": rho, "stability": stability}
            if mode == "steady-state":
                for key, fn in (("exact", theory.exact_steady_state),
                                ("approx", theory.approx_steady_state)):
                    value = None
                    if key in models and (key != "approx" or point.rule != "non-cooperative"):
                        try:
                            value = fn(point).db
                        except NotStableError:
                            value = None
                    entry[f"steady_state_db_{key}"] = value
                entry["steady_state_db_closed_form"] = (
                    _closed_steady(point) if "closed" in models else None
                )
            if "sim" in models:
                result = simulation.monte_carlo(
                    point, workers=workers, record_curves=(mode == "steady-state")
                )
                entry["diverged_fraction"] = result.diverged_fraction
                if mode == "steady-state":
                    entry["steady_state_db_sim"] = result.steady_state_db
            else:
                entry["diverged_fraction"] = None
                if mode == "steady-state":
                    entry["steady_state_db_sim"] = None
            json_rows.append(entry)

        if mode == "steady-state":
            header = ["p_zeta", "rho_phi", "steady_state_db_exact", "steady_state_db_approx",
                      "steady_state_db_closed_form", "steady_state_db_sim", "diverged_fraction"]
            rows = [[e["p_zeta"], e["rho_phi"], e["steady_state_db_exact"],
                     e["steady_state_db_approx"], e["steady_state_db_closed_form"],
                     e["steady_state_db_sim"], e["diverged_fraction"]] for e in json_rows]
            if not any_stable and "sim" not in models:
                _fail(_EXIT_UNSTABLE, "no grid point is stable; no steady state exists")
        else:
            header = ["p_zeta", "rho_phi", "stability", "diverged_fraction"]
            rows = [[e["p_zeta"], e["rho_phi"], e["stability"], e["diverged_fraction"]]
                    for e in json_rows]

        _write_csv(out / "sweep.csv", header, rows)
        _write_json(out / "sweep.json", {
            "metadata": _metadata(f"sweep-pzeta/{mode}", spec, models, workers),
            "rows": json_rows,
        })
        click.echo(f"wrote {out / 'sweep.csv'} and {out / 'sweep.json'}")
    except ConfigError as exc:
        _fail(_EXIT_CONFIG, str(exc))
    except NumericalFailureError as exc:
        _fail(_EXIT_NUMERICAL, str(exc))


@main.command("cost-report")
@click.option("--config", "config_ref", required=True,
              help="Scenario config JSON path, or a preset name (scenario1..scenario4).")
@click.option("--pzeta-grid", "grid_text", default="1,0.5,0.1", show_default=True,
              help="Comma-separated sampling probabilities.")
@click.option("--out", "out_dir", default=".", show_default=True,
              type=click.Path(file_okay=False))
def cost_report_cmd(config_ref, grid_text, out_dir) -> None:
    """Expected multiplication counts per iteration over a p_zeta grid."""
    try:
        spec = _load_spec(config_ref, None, None)
        grid = _parse_grid(grid_text)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        full = cost.network_expected(spec.topology, spec.filter_length, 1.0)
        rows = []
        json_rows = []
        for p in grid:
            report = cost.cost_report(spec.topology, spec.filter_length, p)
            delta = full - report.network_expected
            predicted = cost.savings_expected(spec.node_count, spec.filter_length, p)
            rows.append([p, report.network_expected, delta, predicted])
            json_rows.append({
                "p_zeta": p,
                "network_expected": report.network_expected,
                "delta_vs_full_sampling": delta,
                "savings_predicted": predicted,
                "per_node_expected": [float(v) for v in report.per_node_expected],
            })
        _write_csv(out / "cost.csv",
                   ["p_zeta", "multiplications_total", "delta_vs_full_sampling", "savings_predicted"],
                   rows)
        _write_json(out / "cost.json", {
            "metadata": _metadata("cost-report", spec, set(), None),
            "rows": json_rows,
        })
        click.echo(f"wrote {out / 'cost.csv'} and {out / 'cost.json'}")
    except ConfigError as exc:
        _fail(_EXIT_CONFIG, str(exc))


@main.command("validate-config")
@click.option("--config", "config_ref", required=True,
              help="Scenario config JSON path, or a preset name (scenario1..scenario4).")
def validate_config(config_ref) -> None:
    """Check a scenario config against all invariants; report violations and warnings."""
    try:
        spec = _load_spec(config_ref, None, None)
    except ConfigError as exc:
        _fail(_EXIT_CONFIG, str(exc))
        return
    errors, warnings = validate_spec(spec)
    for message in warnings:
        click.echo(f"warning: {message}")
    if errors:
        for message in errors:
            click.echo(f"error: {message}", err=True)
        sys.exit(_EXIT_CONFIG)
    click.echo("ok")


if __name__ == "__main__":
    main()
