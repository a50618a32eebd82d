"""Command-line front end.

Every command reads a JSON model file (``--config``) and writes CSV or JSON.
Exit codes: 0 pass, 1 condition failure, 2 configuration or IO error.

Model file keys (``schema_version`` 1):

* ``family``: ``vasicek``, ``vasicek_jump``, ``multicurve_vasicek``,
  ``multicurve_jump``, ``curve`` (static flat curves), ``market_model`` or
  ``embedded_market_model`` (as written by ``embed``).
* ``params``: Vasicek parameters (``kappa``, ``theta``, ``sigma``, ``xi0`` per factor,
  ``rho``, ``a``, ``b``, ``c``, ``kappa3``, ``spread0``); ``tenor``, ``horizon``,
  ``jump_date``; ``calendar``: list of dates or a CSV path (relative to the file),
  with optional ``reference_date``.
* ``perturb``: ``{"theta": [per-factor shifts]}`` or ``{"drift": [per-factor rates]}``.
* ``curve``: for the ``curve`` family, ``{"forward": {tenor: rate}, "spreads": {tenor: S0}}``.
* ``market_model``: Gaussian market-model parameters (see :mod:`multicurve.market`).
* command blocks ``price``, ``snapshot``, ``check``, ``simulate``.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .affine import affine_bond_price, random_states, run_condition_suite
from .checker import (EmbeddedState, affine_to_hjm, check_hjm_conditions,
                      check_market_model_conditions, embed_market_model)
from .curve import (DiscontinuityCalendar, ForwardCurve, ForwardCurveField, bond_price, forward_ibor_rate,
                    format_curve_csv, fra_price)
from .errors import ConfigError, DomainError, IntegrabilityError, NumericalError, UnsupportedLawError
from .market import (GaussianMarketModel, MarketState, reconstructed_rates, simulate_embedded, simulate_market,
                     simulated_rates)
from .models import FAMILIES, VasicekParams, build_model, inject_drift, perturb_theta
from .sim import Asset, SimulationPlan, martingale_test, simulate, write_ensemble_csv

SCHEMA_VERSION = 1
CURVE_FAMILY = "curve"
MARKET_FAMILY = "market_model"
EMBEDDED_FAMILY = "embedded_market_model"
ALL_FAMILIES = FAMILIES + (CURVE_FAMILY, MARKET_FAMILY, EMBEDDED_FAMILY)
DEFAULT_TOLERANCE = 1e-8
Z_THRESHOLD = 4.0


class ConditionFailure(Exception):
    """Raised after a report has been written to signal exit code 1."""


# ---------------------------------------------------------------------------
# Config ingestion


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: top level must be an object")
    version = config.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: field 'schema_version': unsupported value {version!r}")
    family = config.get("family")
    if family not in ALL_FAMILIES:
        raise ConfigError(f"{path}: field 'family': unknown model family {family!r}; "
                          f"valid families: {', '.join(ALL_FAMILIES)}")
    config["_base"] = str(path.parent)
    return config


def _field(config: dict, key: str, kind, default=None):
    value = config.get(key, default)
    try:
        return kind(value) if value is not None else None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {key!r}: {exc}") from exc


def _calendar(config: dict, horizon: float):
    spec = config.get("calendar")
    if spec is None:
        return None
    continuous = bool(config.get("continuous", True))
    if isinstance(spec, str):
        path = Path(config["_base"]) / spec
        if not path.exists():
            raise ConfigError(f"field 'calendar': file {path} does not exist")
        return DiscontinuityCalendar.from_csv(path, config.get("reference_date"), horizon, continuous)
    if not isinstance(spec, list):
        raise ConfigError("field 'calendar': expected a list of dates or a CSV path")
    return DiscontinuityCalendar(tuple(float(d) for d in spec), horizon, continuous)


def build_affine(config: dict):
    params = config.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("field 'params': expected an object")
    try:
        vasicek = VasicekParams(**params)
    except TypeError as exc:
        raise ConfigError(f"field 'params': {exc}") from exc
    horizon = _field(config, "horizon", float, 5.0)
    model = build_model(config["family"], vasicek, tenor=_field(config, "tenor", float, 0.5),
                        calendar=_calendar(config, horizon), horizon=horizon,
                        jump_date=_field(config, "jump_date", float, 1.0))
    perturb = config.get("perturb") or {}
    unknown = set(perturb) - {"theta", "drift"}
    if unknown:
        raise ConfigError(f"field 'perturb': unknown keys {sorted(unknown)}; valid keys: drift, theta")
    for key, apply in (("theta", perturb_theta), ("drift", inject_drift)):
        for factor, shift in enumerate(perturb.get(key, [])):
            if shift:
                model = apply(model, factor, float(shift))
    return model


def build_static_curve(config: dict):
    block = config.get("curve")
    if not isinstance(block, dict) or "forward" not in block:
        raise ConfigError("field 'curve': needs a 'forward' object mapping tenors to flat rates")
    horizon = _field(config, "horizon", float, 30.0)
    calendar = _calendar(config, horizon) or DiscontinuityCalendar((), horizon)
    forward = {float(k): float(v) for k, v in block["forward"].items()}
    if 0.0 not in forward:
        raise ConfigError("field 'curve.forward': the OIS rate (tenor 0) is required")
    atoms = {float(k): {float(d): float(v) for d, v in a.items()} for k, a in block.get("atoms", {}).items()}
    curves = {tenor: ForwardCurve(np.array([0.0, horizon]), np.array([rate, rate]), atoms.get(tenor, {}))
              for tenor, rate in forward.items()}
    spreads = {float(k): float(v) for k, v in block.get("spreads", {}).items()}
    return ForwardCurveField(0.0, calendar, curves), spreads


def build_market(config: dict) -> GaussianMarketModel:
    block = config.get("market_model")
    if not isinstance(block, dict):
        raise ConfigError("field 'market_model': expected an object with the Gaussian market-model parameters")
    return GaussianMarketModel.from_config(block)


def _resolve_seed(seed, config: dict, block: dict) -> int:
    value = seed if seed is not None else block.get("seed", config.get("seed", 0))
    try:
        value = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'seed': {exc}") from exc
    if not 0 <= value < 2 ** 64:
        raise ConfigError(f"field 'seed': must be an unsigned 64-bit value, got {value}")
    return value


def _resolve_tolerance(tolerance, block: dict) -> float:
    value = tolerance if tolerance is not None else float(block.get("tolerance", DEFAULT_TOLERANCE))
    if not value > 0:
        raise ConfigError(f"field 'tolerance': must be positive, got {value}")
    return value


# ---------------------------------------------------------------------------
# Output helpers


def _emit_text(text: str, out):
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _json_text(payload: dict) -> str:
    body = _finite_or_null({"schema_version": SCHEMA_VERSION, **payload})
    return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite_or_null(value):
    """Plain JSON values; non-finite numbers (unused lhs/rhs slots) become null."""
    if isinstance(value, dict):
        return {str(k): _finite_or_null(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_finite_or_null(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def _number(value) -> str:
    return format(float(value), ".17g")


def _out_dir(out) -> Path:
    if out is None:
        raise ConfigError("--out: an output directory is required for this command")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def handle_errors(command):
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConditionFailure as exc:
            click.echo(f"condition failure: {exc}", err=True)
            sys.exit(1)
        except IntegrabilityError as exc:
            click.echo(f"condition failure: {exc}", err=True)
            sys.exit(1)
        except (ConfigError, DomainError, UnsupportedLawError, NumericalError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
    return wrapper


def common_options(command):
    options = [
        click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                     help="JSON model file."),
        click.option("--seed", type=int, default=None, help="Master seed (unsigned 64-bit)."),
        click.option("--out", type=click.Path(), default=None, help="Output file or directory."),
        click.option("--paths", "n_paths", type=int, default=None, help="Number of simulated paths."),
        click.option("--tolerance", type=float, default=None, help="Residual tolerance for checks."),
        click.option("--threads", type=int, default=1, show_default=True,
                     help="Worker threads for random-number generation."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@click.group()
def cli():
    """Multiple-curve term-structure models: pricing, checks, simulation and embedding."""


# ---------------------------------------------------------------------------
# price and curve


def _default_maturities(horizon: float) -> list[float]:
    return [float(T) for T in np.arange(0.5, horizon + 1e-9, 0.5)]


def price_rows(config: dict) -> list[list]:
    block = config.get("price", {})
    strikes = [float(k) for k in block.get("strikes", [0.0])]
    if config["family"] == CURVE_FAMILY:
        field_, spreads = build_static_curve(config)
        horizon = field_.calendar.horizon
        tenors = [d for d in field_.tenors if d > 0] + [float(d) for d in block.get("tenors", [])
                                                        if float(d) not in field_.tenors]

        def bond(T, tenor):
            return bond_price(field_, 0.0, T, tenor if tenor in field_.tenors else 0.0)

        def spread(tenor):
            return spreads.get(tenor, 1.0)
    elif config["family"] in FAMILIES:
        model = build_affine(config)
        horizon = model.calendar.horizon if math.isfinite(model.calendar.horizon) else 5.0
        tenors = list(model.tenors.tenors) + [float(d) for d in block.get("tenors", [])
                                              if float(d) not in model.tenors.tenors]

        def bond(T, tenor):
            own = tenor if tenor in model.tenors.tenors else 0.0
            return affine_bond_price(model, 0.0, T, own, model.initial_state)

        def spread(tenor):
            return model.initial_spreads.get(tenor, 1.0)
    else:
        raise ConfigError(f"price: family {config['family']!r} has no closed-form prices")
    maturities = [float(T) for T in block.get("maturities", _default_maturities(min(horizon, 10.0)))]
    rows = []
    for T in maturities:
        rows.append([0.0, T, bond(T, 0.0), "", "", ""])
        for tenor in tenors:
            tenor_bond, ois_bond = bond(T, tenor), bond(T + tenor, 0.0)
            rate = forward_ibor_rate(spread(tenor), tenor_bond, ois_bond, tenor)
            for strike in strikes:
                rows.append([tenor, T, tenor_bond, rate, strike,
                             fra_price(spread(tenor), tenor_bond, ois_bond, tenor, strike)])
    return rows


@cli.command()
@common_options
@handle_errors
def price(config_path, seed, out, n_paths, tolerance, threads):
    """Bond prices, forward Ibor rates and FRA values at time 0 as CSV."""
    config = load_config(config_path)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["tenor", "maturity", "bond", "ibor_rate", "strike", "fra"])
    for row in price_rows(config):
        writer.writerow([_number(v) if v != "" else "" for v in row])
    _emit_text(buffer.getvalue(), out)


@cli.command()
@common_options
@handle_errors
def curve(config_path, seed, out, n_paths, tolerance, threads):
    """Forward-curve snapshot at time 0 as CSV (tenor, maturity, density_value, atom_value)."""
    config = load_config(config_path)
    block = config.get("snapshot", {})
    if config["family"] == CURVE_FAMILY:
        field_, _ = build_static_curve(config)
    elif config["family"] in FAMILIES:
        model = build_affine(config)
        horizon = model.calendar.horizon if math.isfinite(model.calendar.horizon) else 5.0
        maturities = [float(T) for T in block.get("maturities", np.linspace(0.0, horizon, 21))]
        field_ = model.forward_curve(0.0, model.initial_state, maturities)
    else:
        raise ConfigError(f"curve: family {config['family']!r} has no curve snapshot")
    _emit_text(format_curve_csv(field_), out)


# ---------------------------------------------------------------------------
# check


def _hjm_grid(horizon: float, calendar: DiscontinuityCalendar, size: int):
    times = [float(t) for t in np.linspace(0.0, horizon, size)[:-1]]
    times = [t + 1e-9 if t in calendar else t for t in times]
    maturities = sorted(set(float(T) for T in np.linspace(0.0, horizon, size)) | set(calendar.dates))
    return [(t, T) for t in times for T in maturities if T >= t]


def _check_affine(config: dict, block: dict, tolerance: float, seed: int) -> tuple[dict, bool]:
    model = build_affine(config)
    horizon = float(block.get("horizon", model.calendar.horizon if math.isfinite(model.calendar.horizon) else 5.0))
    suite = run_condition_suite(model, horizon, size=int(block.get("grid_size", 21)),
                                n_states=int(block.get("states", 10)), seed=seed)
    hjm_states = list(random_states(model, int(block.get("hjm_states", 2)), seed))
    hjm = check_hjm_conditions(affine_to_hjm(model), _hjm_grid(horizon, model.calendar,
                                                               int(block.get("hjm_grid_size", 6))), hjm_states)
    passed = suite.passed(tolerance) and hjm.passed(tolerance)
    return {"family": model.family, "affine": {r.condition: r.summary(tolerance) for r in suite.reports},
            "affine_failing": suite.failing(tolerance), "hjm": hjm.as_dict(tolerance)}, passed


def _market_states(model: GaussianMarketModel, embedded, count: int, seed: int):
    """Initial state plus states drawn from a short simulation (market and embedded)."""
    times = np.round(np.arange(0.0, model.dates[-1] + 1e-9, model.tenor / 2), 12)
    paths = simulate_market(model, times, max(count, 1), seed=seed)
    tenor_paths = simulate_embedded(embedded, model, paths)
    market, joint = [model.initial_state], [embedded.initial_state]
    for p in range(count):
        k = 1 + p % (times.size - 2)
        state = MarketState(paths.forwards[p, k], paths.log_rates[p, k])
        market.append(state)
        joint.append(EmbeddedState(state, float(np.exp(tenor_paths.log_spread[p, k]))))
    return market, joint


def _market_times(model: GaussianMarketModel) -> list[float]:
    return [float(t) for t in np.arange(model.tenor / 4, model.dates[-1], model.tenor / 2)]


def verify_embedding(model: GaussianMarketModel, tolerance: float, seed: int, states: int = 4):
    """Market-model conditions, the embedded model's HJM conditions and a pathwise round trip."""
    spec = model.spec()
    embedded = embed_market_model(spec)
    market_states, joint_states = _market_states(model, embedded, states, seed)
    times = _market_times(model)
    market = check_market_model_conditions(spec, times, market_states)
    grid = [(t, T) for t in times for T in model.dates if T >= t]
    hjm = check_hjm_conditions(embedded, grid, joint_states)
    round_trip = embedding_round_trip(model, embedded, seed)
    passed = market.passed(tolerance) and hjm.passed(tolerance) and round_trip <= 1e-6
    return embedded, {"market_conditions": market.as_dict(tolerance), "embedded_conditions": hjm.as_dict(tolerance),
                      "round_trip_max_relative_error": round_trip, "round_trip_tolerance": 1e-6}, passed


def embedding_round_trip(model: GaussianMarketModel, embedded, seed: int, n_paths: int = 200) -> float:
    times = np.round(np.arange(0.0, model.dates[-1] + 1e-9, model.tenor / 4), 12)
    paths = simulate_market(model, times, n_paths, seed=seed)
    tenor_paths = simulate_embedded(embedded, model, paths)
    worst = 0.0
    for k in range(times.size):
        rebuilt, direct = reconstructed_rates(model, paths, tenor_paths, k), simulated_rates(model, paths, k)
        for T in direct:
            worst = max(worst, float(np.max(np.abs(rebuilt[T] - direct[T]) / np.maximum(np.abs(direct[T]), 1e-12))))
    return worst


def embedded_tables(model: GaussianMarketModel, embedded) -> dict:
    delta = model.tenor
    state = embedded.initial_state
    return {
        "tenor": delta, "dates": list(model.dates), "settlement": list(model.settlement),
        "maturity_measure": "unit atoms at the dates, no Lebesgue part",
        "initial_ois_forwards": {_number(T): v for T, v in embedded.initial_curves[0.0].items()},
        "initial_tenor_forwards": {_number(T): v for T, v in embedded.initial_curves[delta].items()},
        "initial_spread": embedded.initial_spreads[delta],
        "tenor_volatility_at_0": {_number(T): np.asarray(embedded.volatility(0.0, T, delta, state)).tolist()
                                  for T in model.dates},
        "tenor_drift_at_0": {_number(T): float(embedded.drift(0.0, T, delta, state)) for T in model.dates},
        "spread_coefficients": {"alpha": 0.0, "H": 0.0, "L": 0.0},
    }


def _compare_tables(emitted: dict, recomputed: dict, path: str = "embedded") -> list[str]:
    problems = []
    if isinstance(recomputed, dict):
        if not isinstance(emitted, dict) or set(emitted) != set(recomputed):
            return [f"{path}: keys differ"]
        for key in recomputed:
            problems += _compare_tables(emitted[key], recomputed[key], f"{path}.{key}")
    elif isinstance(recomputed, list):
        if not isinstance(emitted, list) or len(emitted) != len(recomputed):
            return [f"{path}: length differs"]
        for i, (a, b) in enumerate(zip(emitted, recomputed)):
            problems += _compare_tables(a, b, f"{path}[{i}]")
    elif isinstance(recomputed, float):
        if not isinstance(emitted, (int, float)) or abs(emitted - recomputed) > 1e-12 * max(1.0, abs(recomputed)):
            problems.append(f"{path}: emitted {emitted} vs recomputed {recomputed}")
    elif emitted != recomputed:
        problems.append(f"{path}: emitted {emitted!r} vs recomputed {recomputed!r}")
    return problems


@cli.command()
@common_options
@handle_errors
def check(config_path, seed, out, n_paths, tolerance, threads):
    """Run every applicable no-arbitrage condition check; exit 1 if any fails."""
    config = load_config(config_path)
    block = config.get("check", {})
    tolerance = _resolve_tolerance(tolerance, block)
    seed = _resolve_seed(seed, config, block)
    family = config["family"]
    if family in FAMILIES:
        payload, passed = _check_affine(config, block, tolerance, seed)
    elif family in (MARKET_FAMILY, EMBEDDED_FAMILY):
        model = build_market(config)
        embedded, payload, passed = verify_embedding(model, tolerance, seed)
        payload["family"] = family
        if family == EMBEDDED_FAMILY:
            problems = _compare_tables(config.get("embedded"), embedded_tables(model, embedded))
            payload["emitted_tables_match"] = not problems
            payload["table_mismatches"] = problems[:20]
            passed = passed and not problems
    else:
        raise ConfigError(f"check: family {family!r} has no dynamics to check")
    payload.update({"command": "check", "tolerance": tolerance, "seed": seed, "passed": passed})
    _emit_text(_json_text(payload), out)
    if not passed:
        failing = payload.get("affine_failing", []) + payload.get("hjm", {}).get("failing", [])
        failing += payload.get("market_conditions", {}).get("failing", [])
        failing += payload.get("embedded_conditions", {}).get("failing", [])
        raise ConditionFailure(", ".join(dict.fromkeys(failing)) or "see report")


# ---------------------------------------------------------------------------
# simulate


def _simulation_times(block: dict, calendar: DiscontinuityCalendar, horizon: float) -> tuple[float, ...]:
    if "times" in block:
        return tuple(float(t) for t in block["times"])
    step = float(block.get("step", 0.1))
    if not step > 0:
        raise ConfigError("field 'simulate.step': must be positive")
    grid = set(np.round(np.arange(0.0, horizon + 1e-12, step), 12).tolist()) | {
        d for d in calendar.dates if d <= horizon}
    return tuple(sorted(float(t) for t in grid))


def _assets(block: dict, model, horizon: float) -> list[Asset]:
    if "assets" in block:
        return [Asset(a["kind"], float(a["maturity"]), float(a.get("tenor", 0.0)), float(a.get("strike", 0.0)))
                for a in block["assets"]]
    assets = [Asset("ois_bond", horizon)]
    for tenor in model.tenors.tenors:
        assets.append(Asset("fra_leg", horizon, tenor))
    return assets


@cli.command(name="simulate")
@common_options
@handle_errors
def simulate_command(config_path, seed, out, n_paths, tolerance, threads):
    """Simulate paths; write ensemble.csv and martingale.json into --out."""
    config = load_config(config_path)
    if config["family"] not in FAMILIES:
        raise ConfigError(f"simulate: family {config['family']!r} is not an affine model family")
    block = config.get("simulate", {})
    model = build_affine(config)
    seed = _resolve_seed(seed, config, block)
    count = n_paths if n_paths is not None else block.get("paths", 1000)
    horizon = float(block.get("horizon", min(model.calendar.horizon, 2.0)))
    times = _simulation_times(block, model.calendar, horizon)
    if threads < 1:
        raise ConfigError("--threads must be at least 1")
    plan = SimulationPlan(times, count, seed)
    directory = _out_dir(out)
    ensemble = simulate(model, plan, threads=threads)
    export = int(block.get("export_paths", count))
    write_ensemble_csv(directory / "ensemble.csv", _first_paths(ensemble, export) if export < count else ensemble)
    check_count = int(block.get("check_times", 10))
    check_times = [float(t) for t in np.linspace(times[0], horizon, check_count + 1)[1:]]
    check_times = [min(times, key=lambda s: abs(s - t)) for t in check_times]
    reports = [martingale_test(model, ensemble, asset, sorted(set(check_times))).as_dict()
               for asset in _assets(block, model, horizon)]
    max_z = max(r["max_abs_z"] for r in reports)
    passed = max_z <= float(block.get("z_threshold", Z_THRESHOLD))
    payload = {"command": "simulate", "family": model.family, "seed": seed, "n_paths": count,
               "times": list(times), "max_abs_z": max_z, "z_threshold": float(block.get("z_threshold", Z_THRESHOLD)),
               "passed": passed, "assets": reports}
    (directory / "martingale.json").write_text(_json_text(payload))
    if not passed:
        raise ConditionFailure(f"martingale test max |z| = {max_z:.2f}")


def _first_paths(ensemble, count: int):
    from dataclasses import replace

    return replace(ensemble, states=ensemble.states[:count], log_numeraire=ensemble.log_numeraire[:count],
                   log_spreads=ensemble.log_spreads[:count], left_states=ensemble.left_states[:count],
                   left_log_numeraire=ensemble.left_log_numeraire[:count],
                   left_log_spreads=ensemble.left_log_spreads[:count])


# ---------------------------------------------------------------------------
# embed


@cli.command()
@common_options
@handle_errors
def embed(config_path, seed, out, n_paths, tolerance, threads):
    """Embed a market model into an HJM model; write embedded_spec.json and embed_report.json."""
    config = load_config(config_path)
    if config["family"] != MARKET_FAMILY:
        raise ConfigError(f"embed: expected family {MARKET_FAMILY!r}, got {config['family']!r}")
    block = config.get("check", {})
    tolerance = _resolve_tolerance(tolerance, block)
    seed = _resolve_seed(seed, config, block)
    model = build_market(config)
    directory = _out_dir(out)
    embedded, report, passed = verify_embedding(model, tolerance, seed)
    spec_file = {"family": EMBEDDED_FAMILY, "market_model": config["market_model"],
                 "embedded": embedded_tables(model, embedded)}
    (directory / "embedded_spec.json").write_text(_json_text(spec_file))
    report.update({"command": "embed", "tolerance": tolerance, "seed": seed, "passed": passed})
    (directory / "embed_report.json").write_text(_json_text(report))
    if not passed:
        raise ConditionFailure("embedding verification failed; see embed_report.json")


def main():
    cli()


if __name__ == "__main__":
    main()
