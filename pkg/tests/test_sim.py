import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multicurve.errors import ConfigError, DomainError
from multicurve.models import (VasicekParams, build_model, build_multicurve_jump, build_vasicek_jump,
                               build_vasicek_single, inject_drift, shift_numeraire_jump)
from multicurve.curve import DiscontinuityCalendar
from multicurve.sim import (SimulationPlan, fra, fra_leg, martingale_test, ois_bond, path_normals, philox4x64,
                            sample_mean_and_error, scheduled_jump_test, simulate, step_covariance, write_ensemble_csv,
                            z_score)

TWO_FACTOR = dict(kappa=(0.5, 0.8), theta=(0.03, 0.035), sigma=(0.01, 0.012), xi0=(0.02, 0.025), rho=0.3)


# ---------------------------------------------------------------------------
# Random streams


def test_philox_matches_numpy_bit_generator():
    generator = np.random.Philox(key=np.array([7, 0], dtype=np.uint64), counter=np.array([5, 3, 0, 0], dtype=np.uint64))
    expected = generator.random_raw(8)
    # numpy increments the counter before producing its first block
    counter = (np.array([6, 7], dtype=np.uint64), np.array([3, 3], dtype=np.uint64),
               np.zeros(2, np.uint64), np.zeros(2, np.uint64))
    assert np.array_equal(np.stack(philox4x64(counter, (7, 0)), axis=-1).ravel(), expected)


def test_path_normals_are_standard_normal():
    z = path_normals(5, np.arange(20000), 0, 8).ravel()
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * math.sqrt(2 / z.size)


def test_path_normals_depend_only_on_path_id():
    whole = path_normals(9, np.arange(10), 3, 6)
    part = path_normals(9, np.arange(4, 7), 3, 6)
    assert np.array_equal(whole[4:7], part)


# ---------------------------------------------------------------------------
# Plan validation


def test_plan_rejects_empty_ensemble():
    with pytest.raises(ConfigError):
        SimulationPlan((0.0, 1.0), 0)


def test_plan_rejects_unsorted_times_and_bad_seed():
    with pytest.raises(ConfigError):
        SimulationPlan((0.0, 1.0, 0.5), 10)
    with pytest.raises(ConfigError):
        SimulationPlan((0.0, 1.0), 10, seed=-1)


def test_plan_must_contain_calendar_dates():
    model = build_vasicek_jump(VasicekParams(a=0.2, b=0.1))
    with pytest.raises(ConfigError, match="missing"):
        simulate(model, SimulationPlan((0.0, 0.5, 2.0), 10))


# ---------------------------------------------------------------------------
# Determinism


def test_simulation_is_reproducible_across_threads_and_batches():
    model = build_model("multicurve_jump", VasicekParams(**TWO_FACTOR, a=0.3, c=0.05, kappa3=2.0))
    times = (0.0, 0.5, 1.0, 1.5, 2.0)
    single = simulate(model, SimulationPlan(times, 300, seed=42))
    threaded = simulate(model, SimulationPlan(times, 300, seed=42), threads=4)
    batch = simulate(model, SimulationPlan(times, 100, seed=42, first_path=100))
    assert np.array_equal(single.states, threaded.states)
    assert np.array_equal(single.log_numeraire, threaded.log_numeraire)
    assert np.array_equal(single.states[100:200], batch.states)
    assert np.array_equal(single.left_states[100:200], batch.left_states)


def test_different_seeds_differ():
    model = build_vasicek_single(VasicekParams())
    one = simulate(model, SimulationPlan((0.0, 1.0), 50, seed=1))
    two = simulate(model, SimulationPlan((0.0, 1.0), 50, seed=2))
    assert not np.array_equal(one.states, two.states)


def test_ensemble_csv_is_reproducible(tmp_path):
    model = build_vasicek_jump(VasicekParams(a=0.2, b=0.1))
    plan = SimulationPlan((0.0, 1.0, 2.0), 5, seed=8)
    write_ensemble_csv(tmp_path / "a.csv", simulate(model, plan))
    write_ensemble_csv(tmp_path / "b.csv", simulate(model, plan, threads=3))
    text = (tmp_path / "a.csv").read_text()
    assert text == (tmp_path / "b.csv").read_text()
    lines = text.splitlines()
    assert lines[0].startswith("path,time,limit,x0")
    assert len(lines) == 1 + 5 * 4
    assert sum(",left," in line for line in lines) == 5


# ---------------------------------------------------------------------------
# Exact transitions


def test_step_covariance_matches_closed_form():
    kappa, sigma, dt = 0.7, 0.02, 1.3
    cov = step_covariance(build_vasicek_single(VasicekParams(kappa=kappa, sigma=sigma)).dynamics, dt)
    b1 = (1 - math.exp(-kappa * dt)) / kappa
    b2 = (1 - math.exp(-2 * kappa * dt)) / (2 * kappa)
    assert cov[0, 0] == pytest.approx(sigma ** 2 * b2, rel=1e-13)
    assert cov[1, 1] == pytest.approx(sigma ** 2 / kappa ** 2 * (dt - 2 * b1 + b2), rel=1e-12)
    assert cov[0, 1] == pytest.approx(sigma ** 2 / kappa * (b1 - b2), rel=1e-12)


def test_one_step_variance():
    model = build_vasicek_single(VasicekParams(kappa=0.5, theta=0.03, sigma=0.01))
    ensemble = simulate(model, SimulationPlan((0.0, 0.01), 100_000, seed=4))
    xi = ensemble.states[:, 1, 2]
    expected = 0.01 ** 2 * (1 - math.exp(-2 * 0.5 * 0.01)) / (2 * 0.5)
    assert expected == pytest.approx(9.9502e-7, rel=1e-4)
    var = xi.var(ddof=1)
    assert abs(var - expected) <= 3 * expected * math.sqrt(2 / (xi.size - 1))


@settings(max_examples=8, deadline=None)
@given(kappa=st.floats(0.05, 3.0), theta=st.floats(-0.02, 0.08), sigma=st.floats(0.001, 0.05),
       dt=st.floats(0.01, 3.0))
def test_exact_transition_moments(kappa, theta, sigma, dt):
    model = build_vasicek_single(VasicekParams(kappa=kappa, theta=theta, sigma=sigma, xi0=0.02))
    xi = simulate(model, SimulationPlan((0.0, dt), 20_000, seed=6)).states[:, 1, 2]
    mean = theta + (0.02 - theta) * math.exp(-kappa * dt)
    var = sigma ** 2 * (1 - math.exp(-2 * kappa * dt)) / (2 * kappa)
    assert abs(xi.mean() - mean) <= 4.5 * math.sqrt(var / xi.size)
    assert abs(xi.var(ddof=1) - var) <= 4.5 * var * math.sqrt(2 / (xi.size - 1))


def test_zero_volatility_paths_are_deterministic():
    model = build_vasicek_single(VasicekParams(sigma=0.0))
    ensemble = simulate(model, SimulationPlan((0.0, 0.5, 2.0), 3, seed=1))
    for k, t in enumerate((0.0, 0.5, 2.0)):
        xi = 0.03 + (0.02 - 0.03) * math.exp(-0.5 * t)
        integral = 0.03 * t + (0.02 - 0.03) * (1 - math.exp(-0.5 * t)) / 0.5
        assert np.allclose(ensemble.states[:, k, 2], xi, rtol=0, atol=1e-16)
        assert np.allclose(ensemble.log_numeraire[:, k], integral, rtol=0, atol=1e-16)


def test_spike_decays_between_dates():
    params = VasicekParams(**TWO_FACTOR, kappa3=50.0)
    model = build_multicurve_jump(params, DiscontinuityCalendar((1.0,), 5.0))
    ensemble = simulate(model, SimulationPlan((0.0, 1.0, 1.1), 200, seed=2))
    after, later = ensemble.states[:, 1, 6], ensemble.states[:, 2, 6]
    assert np.allclose(later, after * math.exp(-5.0), rtol=1e-12, atol=0)


def test_spread_is_exponential_of_state():
    params = VasicekParams(**TWO_FACTOR, a=0.3, c=0.05, kappa3=2.0, spread0=1.002)
    model = build_model("multicurve_jump", params)
    ensemble = simulate(model, SimulationPlan((0.0, 0.5, 1.0, 1.7, 2.0), 100, seed=3))
    expected = math.log(1.002) + ensemble.states[:, :, 3] + 0.3 * ensemble.states[:, :, 6]
    assert np.allclose(ensemble.log_spreads[:, :, 0], expected, rtol=0, atol=1e-14)


def test_left_limits_record_the_applied_jump():
    model = build_model("multicurve_jump", VasicekParams(**TWO_FACTOR, a=0.3, c=0.05, kappa3=2.0))
    ensemble = simulate(model, SimulationPlan((0.0, 1.0, 2.0), 50, seed=5))
    assert ensemble.jump_times == (1.0, 2.0)
    left, _, _ = ensemble.snapshot(1.0, left=True)
    right, log_n, _ = ensemble.snapshot(1.0)
    move = right - left
    assert np.allclose(move[:, 0], 1.0)
    assert np.allclose(move[:, [1, 2, 3, 4, 5]], 0.0)
    left_log_n = ensemble.snapshot(1.0, left=True)[1]
    assert np.allclose(log_n - left_log_n, 0.05 * move[:, 6], atol=1e-15)


def test_snapshot_off_grid_is_an_error():
    model = build_vasicek_single(VasicekParams())
    ensemble = simulate(model, SimulationPlan((0.0, 1.0), 5))
    with pytest.raises(DomainError):
        ensemble.snapshot(0.5)


def test_short_end_of_simulated_curve_is_short_rate():
    model = build_model("multicurve_vasicek", VasicekParams(**TWO_FACTOR))
    ensemble = simulate(model, SimulationPlan((0.0, 0.7), 50, seed=1))
    states = ensemble.states[:, 1]
    assert np.allclose(model.forward_rate(0.7, 0.7, 0.0, states), states @ model.loadings.short_rate, atol=1e-16)


# ---------------------------------------------------------------------------
# Statistics and martingale tests


def test_z_score_edge_cases():
    assert z_score(1.0, 1.0, 0.0) == 0.0
    assert z_score(1.1, 1.0, 0.0) == math.inf
    assert z_score(1.1, 1.0, 0.05) == pytest.approx(2.0)


def test_sample_mean_and_error():
    mean, error = sample_mean_and_error(np.array([1.0, 2.0, 3.0, 4.0]))
    assert mean == 2.5
    assert error == pytest.approx(math.sqrt(5 / 3 / 4))


def test_deterministic_model_has_zero_z():
    model = build_vasicek_single(VasicekParams(sigma=0.0))
    ensemble = simulate(model, SimulationPlan((0.0, 0.5, 1.0), 200, seed=1))
    report = martingale_test(model, ensemble, ois_bond(3.0))
    assert report.max_abs_z == 0.0


def test_small_ensemble_warns():
    model = build_vasicek_single(VasicekParams())
    ensemble = simulate(model, SimulationPlan((0.0, 1.0), 10))
    with pytest.warns(UserWarning, match="degenerate"):
        report = martingale_test(model, ensemble, ois_bond(2.0))
    assert report.warning


def test_martingale_test_accepts_consistent_model_and_rejects_drift():
    params = VasicekParams(**TWO_FACTOR)
    model = build_model("multicurve_vasicek", params)
    times = tuple(np.linspace(0.0, 2.0, 5))
    plan = SimulationPlan(times, 20_000, seed=12)
    good = simulate(model, plan)
    for asset in (ois_bond(3.0), fra_leg(2.0, 0.5), fra(2.0, 0.5, 0.03)):
        assert martingale_test(model, good, asset).max_abs_z <= 4
    bad = inject_drift(model, 0, 0.01)
    report = martingale_test(bad, simulate(bad, plan), ois_bond(3.0))
    assert report.max_abs_z > 4


def test_asset_validation():
    with pytest.raises(ConfigError):
        fra_leg(1.0, 0.0)
    model = build_vasicek_single(VasicekParams())
    ensemble = simulate(model, SimulationPlan((0.0, 2.0), 5))
    with pytest.raises(DomainError):
        martingale_test(model, ensemble, ois_bond(1.0), check_times=[2.0])


def test_jump_free_jump_model_has_no_price_jump():
    model = build_vasicek_jump(VasicekParams())
    ensemble = simulate(model, SimulationPlan((0.0, 1.0, 2.0), 500, seed=3))
    report = scheduled_jump_test(model, ensemble, ois_bond(3.0), 1)
    assert abs(report.mean) <= 1e-16 and report.max_abs_z <= 4


def test_scheduled_jump_test_detects_wrong_numeraire_jump():
    params = VasicekParams(a=0.2, b=0.1)
    model = build_vasicek_jump(params)
    plan = SimulationPlan((0.0, 1.0, 2.0), 20_000, seed=9)
    good = scheduled_jump_test(model, simulate(model, plan), ois_bond(3.0), 1)
    assert good.max_abs_z <= 4
    bad = shift_numeraire_jump(model, np.array([0.0, 0.0, 0.0, 0.0, 0.5]))
    report = scheduled_jump_test(bad, simulate(bad, plan), ois_bond(3.0), 1)
    assert abs(report.z) > 4
