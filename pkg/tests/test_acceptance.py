"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
quantity, its threshold and the runtime, then asserts.  Run with ``pytest -v``.
"""

import json
import math
import os
import time

import numpy as np
import pytest
from click.testing import CliRunner

from multicurve import DiscontinuityCalendar, eta_integrate
from multicurve.affine import check_scheduled_jump_condition, riccati_rk4, run_condition_suite, vasicek_transform
from multicurve.checker import EmbeddedState, check_hjm_conditions, embed_market_model
from multicurve.cli import cli
from multicurve.curve import forward_ibor_rate, fra_price
from multicurve.market import (GaussianMarketModel, MarketState, reconstructed_rates, simulate_embedded,
                               simulate_market, simulated_rates)
from multicurve.models import VasicekParams, build_model, build_vasicek_jump, inject_drift
from multicurve.sim import SimulationPlan, fra_leg, martingale_test, ois_bond, scheduled_jump_test, simulate

IDENTITY_TOL = 1e-8
TWO_FACTOR = dict(kappa=(0.5, 0.8), theta=(0.03, 0.035), sigma=(0.01, 0.012), xi0=(0.02, 0.025), rho=0.3)
SPIKE = dict(TWO_FACTOR, a=0.3, c=0.05, kappa3=2.0)


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title} [{detail}]")
    assert ok, detail


def shipped_models(horizon=5.0):
    return {
        "vasicek": build_model("vasicek", VasicekParams(), horizon=horizon),
        "vasicek_jump": build_model("vasicek_jump", VasicekParams(a=0.2, b=0.1), horizon=horizon),
        "multicurve_vasicek": build_model("multicurve_vasicek", VasicekParams(**TWO_FACTOR), horizon=horizon),
        "multicurve_jump": build_model("multicurve_jump", VasicekParams(**SPIKE),
                                       calendar=DiscontinuityCalendar((1.0, 2.0, 3.0, 4.0), horizon)),
    }


# ---------------------------------------------------------------------------
# 1. affine condition suite


def test_criterion_1_affine_condition_suite(capsys):
    start = time.perf_counter()
    worst, failing = 0.0, {}
    for name, model in shipped_models().items():
        suite = run_condition_suite(model, 5.0, size=21, n_states=10, seed=1)
        worst = max(worst, suite.max_abs)
        if not suite.passed(IDENTITY_TOL):
            failing[name] = suite.failing(IDENTITY_TOL)
    elapsed = time.perf_counter() - start
    ok = worst <= IDENTITY_TOL and not failing and elapsed < 10.0
    report(capsys, 1, "affine condition suite on the four shipped families", ok,
           f"max |residual| {worst:.2e} <= 1e-08, failing {failing or 'none'}, {elapsed:.1f}s < 10s")


# ---------------------------------------------------------------------------
# 2. Riccati cross-validation


def test_criterion_2_riccati_cross_validation(capsys):
    start = time.perf_counter()
    kappa, sigma, theta, u = np.meshgrid([0.1, 0.5, 2.0], [0.0, 0.01, 0.1], [-0.02, 0.03],
                                         np.linspace(-2.0, 2.0, 9), indexing="ij")
    taus = np.linspace(0.0, 10.0, 21)
    ode_a, ode_b = riccati_rk4(kappa, theta, sigma, taus, u, step=1e-4)
    worst = 0.0
    for k, tau in enumerate(taus):
        closed_a, closed_b = vasicek_transform(kappa, theta, sigma, tau, u)
        worst = max(worst, float(np.max(np.abs(closed_a - ode_a[k]) + np.abs(closed_b - ode_b[k]))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 5.0
    report(capsys, 2, "Riccati closed form vs RK4 over the parameter box", ok,
           f"max |dA|+|dB| {worst:.2e} <= 1e-06 on {kappa.size * taus.size} points, {elapsed:.1f}s < 5s")


# ---------------------------------------------------------------------------
# 3. composed bond formula of the single-jump model vs Monte Carlo


def _monte_carlo_bond(model, t, maturity, n_paths, batch=250_000):
    """Mean and standard error of exp(-log numeraire) at ``maturity`` from ``t``."""
    start_state = (t,) + tuple(model.initial_state[1:])
    times = tuple(sorted({t, 1.0, maturity}))
    values = []
    for first in range(0, n_paths, batch):
        plan = SimulationPlan(times, min(batch, n_paths - first), seed=2024, first_path=first,
                              start_state=start_state)
        ensemble = simulate(model, plan)
        values.append(np.exp(-ensemble.log_numeraire[:, ensemble.time_index(maturity)]))
    values = np.concatenate(values)
    return values.mean(), values.std(ddof=1) / math.sqrt(values.size)


def test_criterion_3_jump_bond_formula_against_monte_carlo(capsys):
    start = time.perf_counter()
    parameter_sets = [VasicekParams(a=0.2, b=0.1),
                      VasicekParams(kappa=(1.0,), theta=(0.04,), sigma=(0.02,), xi0=(0.01,), a=-0.3, b=0.05),
                      VasicekParams(kappa=(0.3,), theta=(0.02,), sigma=(0.015,), xi0=(0.03,), a=0.5, b=0.2)]
    worst_z, exact, generic = 0.0, True, 0.0
    for params in parameter_sets:
        model = build_vasicek_jump(params)
        for t, maturity in ((0.0, 2.5), (0.4, 1.0)):
            x = model.initial_state.copy()
            x[0] = t
            formula = model.bond(t, maturity, 0.0, x)
            mean, error = _monte_carlo_bond(model, t, maturity, 1_000_000)
            worst_z = max(worst_z, abs(mean - formula) / error)
        for xi in (-0.02, 0.0, 0.05):
            pre = np.array([1.0, 0.4, xi, 0.0, 0.0])
            exact &= model.forward_rate(1.0, 1.0, 0.0, pre, pre=True) == params.a * xi - 0.5 * params.b ** 2
            generic = max(generic, abs(check_scheduled_jump_condition(model, 1, 1.0, pre)))
    no_loading = build_vasicek_jump(VasicekParams(a=0.0, b=0.1))
    atom = no_loading.forward_rate(0.0, 1.0, 0.0, no_loading.initial_state)
    exact &= atom == -0.5 * 0.1 ** 2
    elapsed = time.perf_counter() - start
    ok = worst_z <= 3.0 and exact and generic <= 1e-15 and elapsed < 120.0
    report(capsys, 3, "composed jump-model bond price vs 10^6-path Monte Carlo", ok,
           f"max |z| {worst_z:.2f} <= 3 over 3 parameter sets x 2 (t,T), jump atom and "
           f"f(0,1,0) = -b^2/2 exact: {bool(exact)}, generic jump residual {generic:.1e} <= 1e-15, "
           f"{elapsed:.1f}s < 120s")


# ---------------------------------------------------------------------------
# 4. martingale certification


def _martingale_run(model, n_paths=100_000, seed=77):
    times = tuple(float(t) for t in np.round(np.arange(0.0, 5.0 + 1e-9, 0.5), 12))
    ensemble = simulate(model, SimulationPlan(times, n_paths, seed=seed))
    assets = [ois_bond(5.0)] + [fra_leg(5.0, tenor) for tenor in model.tenors.tenors]
    return max(martingale_test(model, ensemble, asset, list(times[1:])).max_abs_z for asset in assets)


@pytest.mark.parametrize("family", ["vasicek", "vasicek_jump", "multicurve_vasicek", "multicurve_jump"])
def test_criterion_4_martingale_certification(capsys, family):
    start = time.perf_counter()
    model = shipped_models(horizon=6.0)[family]
    consistent = _martingale_run(model)
    violated = _martingale_run(inject_drift(model, 0, 0.01))
    elapsed = time.perf_counter() - start
    ok = consistent <= 4.0 and violated > 4.0 and elapsed < 120.0
    report(capsys, 4, f"martingale certification, {family}", ok,
           f"max |z| {consistent:.2f} <= 4 at 10^5 paths x 10 times, injected 1%/yr drift max |z| "
           f"{violated:.2f} > 4, {elapsed:.1f}s < 120s")


# ---------------------------------------------------------------------------
# 5. scheduled-jump tests


@pytest.mark.parametrize("family", ["vasicek_jump", "multicurve_jump"])
def test_criterion_5_scheduled_jump_tests(capsys, family):
    start = time.perf_counter()
    model = shipped_models(horizon=6.0)[family]
    times = tuple(float(t) for t in np.round(np.arange(0.0, 5.0 + 1e-9, 0.5), 12))
    ensemble = simulate(model, SimulationPlan(times, 100_000, seed=31))
    assets = [ois_bond(5.0)] + [fra_leg(5.0, tenor) for tenor in model.tenors.tenors]
    worst, count, suppressed = 0.0, 0, 0
    for asset in assets:
        for n in range(1, len(model.calendar.dates) + 1):
            result = scheduled_jump_test(model, ensemble, asset, n, bins=5)
            worst = max(worst, result.max_abs_z)
            count += 1 + len(result.bins)
            suppressed += result.suppressed
    elapsed = time.perf_counter() - start
    ok = worst <= 3.0 and suppressed == 0
    report(capsys, 5, f"scheduled-jump martingale tests, {family}", ok,
           f"max |z| {worst:.2f} <= 3 over {count} overall and quintile means, "
           f"{suppressed} suppressed bins, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 6. single-curve degeneration


def test_criterion_6_single_curve_degeneration(capsys):
    rng = np.random.default_rng(6)
    worst_fra, worst_rate = 0.0, 0.0
    for _ in range(1000):
        rate, tenor = rng.uniform(-0.01, 0.08), rng.choice([0.25, 0.5, 1.0])
        T, strike = rng.uniform(0.0, 10.0), rng.uniform(-0.01, 0.08)
        bond_T, bond_end = math.exp(-rate * T), math.exp(-rate * (T + tenor))
        textbook_rate = (bond_T / bond_end - 1.0) / tenor
        textbook_fra = tenor * bond_end * (textbook_rate - strike)
        worst_fra = max(worst_fra, abs(fra_price(1.0, bond_T, bond_end, tenor, strike) - textbook_fra))
        worst_rate = max(worst_rate, abs(forward_ibor_rate(1.0, bond_T, bond_end, tenor) - textbook_rate))
    ok = worst_fra <= 1e-12 and worst_rate <= 1e-12
    report(capsys, 6, "single-curve FRA equals the textbook formula", ok,
           f"max |FRA diff| {worst_fra:.1e}, max |rate diff| {worst_rate:.1e} <= 1e-12 over 1000 draws")


# ---------------------------------------------------------------------------
# 7. embedding round trip


def _gaussian_market(stochastic=True):
    rng = np.random.default_rng(7)
    scale = 1.0 if stochastic else 0.0
    return GaussianMarketModel(tenor=0.5, periods=3, dim=2,
                               initial_forwards=0.02 + 0.002 * np.arange(4),
                               initial_rates=0.024 + 0.0025 * np.arange(4),
                               ois_vols=scale * rng.uniform(0.002, 0.009, (4, 2)),
                               rate_vols=scale * rng.uniform(0.02, 0.12, (4, 2)),
                               ois_jumps=scale * rng.uniform(0.001, 0.004, 4),
                               rate_jumps=scale * rng.uniform(0.02, 0.06, 4))


def _round_trip(model, embedded, step, n_paths):
    times = np.round(np.arange(0.0, model.dates[-1] + 1e-9, step), 12)
    paths = simulate_market(model, times, n_paths, seed=5)
    tenor_paths = simulate_embedded(embedded, model, paths)
    worst = 0.0
    for k in range(times.size):
        rebuilt, direct = reconstructed_rates(model, paths, tenor_paths, k), simulated_rates(model, paths, k)
        for T in direct:
            worst = max(worst, float(np.max(np.abs(rebuilt[T] / direct[T] - 1.0))))
    return worst, paths, tenor_paths


def _hand_values():
    """Initial tenor forwards, spread and one spread jump from hand inputs."""
    model = GaussianMarketModel(tenor=0.5, periods=3, dim=1, initial_forwards=[0.010, 0.012, 0.015, 0.020],
                                initial_rates=[0.020, 0.022, 0.026, 0.030], ois_vols=0.0, rate_vols=0.0,
                                ois_jumps=[0.0, 0.002, 0.003, 0.001], rate_jumps=[0.0, 0.04, 0.05, 0.02])
    embedded = embed_market_model(model.spec())
    hand_forwards = {0.5: 0.012 - math.log(1.011 / 1.010), 1.0: 0.015 - math.log(1.013 / 1.011),
                     1.5: 0.020 - math.log(1.015 / 1.013), 2.0: 0.0}
    gaps = [abs(embedded.initial_curves[0.5][T] - v) for T, v in hand_forwards.items()]
    gaps.append(abs(embedded.initial_spreads[0.5] - 1.010 * math.exp(-0.010)))
    state = EmbeddedState(MarketState(np.array([0.011, 0.013, 0.016, 0.019]),
                                      np.log1p(0.5 * np.array([0.0, 0.021, 0.027, 0.029]))), 1.004)
    eps = np.array([[-0.7], [0.4]])
    fixing_ratio = np.exp(0.05 * eps[:, 0] + 0.05 * 0.003 - 0.5 * 0.05 ** 2)
    shift_next = 0.003 * eps[:, 0] + 0.5 * 0.003 ** 2
    tenor_forward = math.log(1.004) + 0.013 + 0.016 - math.log(1 + 0.5 * 0.027)
    hand_jump = fixing_ratio * np.exp(0.013 - tenor_forward - shift_next) - 1
    gaps.extend(np.abs(embedded.spread_scheduled(2, eps, 0.5, state) - hand_jump))
    return max(gaps)


def test_criterion_7_embedding_round_trip(capsys):
    start = time.perf_counter()
    model = _gaussian_market()
    embedded = embed_market_model(model.spec())
    stochastic, paths, tenor_paths = _round_trip(model, embedded, 0.05, 1000)
    states = [embedded.initial_state]
    for k in (5, 15, 25):
        for p in range(2):
            states.append(EmbeddedState(MarketState(paths.forwards[p, k], paths.log_rates[p, k]),
                                        math.exp(tenor_paths.log_spread[p, k])))
    grid = [(t, T) for t in (0.1, 0.7, 1.2, 1.8) for T in model.dates if T >= t]
    conditions = check_hjm_conditions(embedded, grid, states).max_abs
    deterministic_model = _gaussian_market(stochastic=False)
    deterministic, _, _ = _round_trip(deterministic_model, embed_market_model(deterministic_model.spec()), 0.125, 10)
    hand_gap = _hand_values()
    elapsed = time.perf_counter() - start
    ok = conditions <= IDENTITY_TOL and deterministic <= 1e-8 and stochastic <= 1e-6 and hand_gap <= 1e-15
    report(capsys, 7, "market-model embedding round trip", ok,
           f"(a) HJM residual {conditions:.1e} <= 1e-08, (b) reconstruction {deterministic:.1e} <= 1e-08 "
           f"deterministic / {stochastic:.1e} <= 1e-06 stochastic, (c) hand-input gap {hand_gap:.1e}, "
           f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 8. eta-integral identities of the spike model


def test_criterion_8_spike_eta_integrals(capsys):
    params = VasicekParams(**SPIKE)
    a, c, k3 = params.a, params.c, params.kappa3
    model = build_model("multicurve_jump", params, calendar=DiscontinuityCalendar((1.0, 2.0, 3.0, 4.0), 10.0))
    lift = 1 + a * k3
    worst = 0.0
    for date in model.calendar.dates:
        for gap in (0.25, 1.0, 5.0):
            q = math.exp(-k3 * gap)
            closed = {0.0: (-(c / k3) * (q - 1) + (q - 1) ** 2 / (2 * k3 ** 2), -(q - 1) / k3),
                      0.5: ((a - c) * lift / k3 * (q - 1) + lift ** 2 / (2 * k3 ** 2) * (q - 1) ** 2,
                            -lift * (q - 1) / k3)}
            for tenor, (phi1, phi7) in closed.items():
                integral = eta_integrate(lambda u: model.loadings.forward[tenor](date, u), date, date + gap,
                                         model.calendar)
                worst = max(worst, abs(integral[0] - phi1), abs(integral[6] - phi7))
    report(capsys, 8, "spike-model eta integrals match the closed forms", worst <= 1e-10,
           f"max |diff| {worst:.1e} <= 1e-10 over 4 dates x 3 gaps x 2 tenors")


# ---------------------------------------------------------------------------
# 9. determinism across thread counts


def test_criterion_9_simulate_is_deterministic_across_threads(capsys, tmp_path):
    config = {"schema_version": 1, "family": "multicurve_jump", "params": SPIKE, "tenor": 0.5,
              "calendar": [1.0, 2.0, 3.0, 4.0],
              "simulate": {"step": 0.25, "horizon": 2.0, "paths": 5000, "check_times": 8}}
    path = tmp_path / "model.json"
    path.write_text(json.dumps(config))
    threads = max(os.cpu_count() or 1, 4)
    runner = CliRunner()
    codes = [runner.invoke(cli, ["simulate", "--config", str(path), "--seed", "12345", "--threads", str(n),
                                 "--out", str(tmp_path / f"t{n}")]).exit_code for n in (1, threads)]
    identical = all((tmp_path / "t1" / name).read_bytes() == (tmp_path / f"t{threads}" / name).read_bytes()
                    for name in ("ensemble.csv", "martingale.json"))
    ok = codes == [0, 0] and identical
    report(capsys, 9, "simulate output is byte-identical across thread counts", ok,
           f"1 vs {threads} threads, exit codes {codes}, ensemble.csv and martingale.json identical: {identical}")
