import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from multicurve.affine import riccati_rk4
from multicurve.cli import ALL_FAMILIES, cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(*args):
    return CliRunner().invoke(cli, [str(a) for a in args], catch_exceptions=False)


def write_config(tmp_path, config, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return path


def shipped(name):
    return json.loads((CONFIGS / f"{name}.json").read_text())


def csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# ---------------------------------------------------------------------------
# price and curve


def test_flat_curve_prices_match_hand_discounting():
    result = run("price", "--config", CONFIGS / "flat_curve.json")
    assert result.exit_code == 0, result.output
    rows = csv_rows(result.output)
    for row in rows:
        T = float(row["maturity"])
        if row["tenor"] == "0":
            assert float(row["bond"]) == pytest.approx(math.exp(-0.03 * T), rel=1e-14)
        else:
            rate = (math.exp(-0.035 * T) / math.exp(-0.03 * (T + 0.5)) - 1.0) / 0.5
            assert float(row["ibor_rate"]) == pytest.approx(rate, rel=1e-12)
            fra = math.exp(-0.035 * T) - (1 + 0.5 * float(row["strike"])) * math.exp(-0.03 * (T + 0.5))
            assert float(row["fra"]) == pytest.approx(fra, abs=1e-15)
    assert {row["strike"] for row in rows if row["tenor"] != "0"} == {"0", "0.029999999999999999"}


def test_vasicek_bond_column_matches_riccati_integration():
    result = run("price", "--config", CONFIGS / "vasicek.json")
    assert result.exit_code == 0, result.output
    rows = csv_rows(result.output)
    maturities = [float(r["maturity"]) for r in rows]
    a, b = riccati_rk4(0.5, 0.03, 0.01, maturities, 0.0)
    for row, a_T, b_T in zip(rows, a, b):
        assert float(row["bond"]) == pytest.approx(math.exp(-a_T - b_T * 0.02), rel=1e-10)


def test_price_writes_to_out_file(tmp_path):
    out = tmp_path / "prices.csv"
    result = run("price", "--config", CONFIGS / "multicurve_jump.json", "--out", out)
    assert result.exit_code == 0
    rows = csv_rows(out.read_text())
    assert {r["tenor"] for r in rows} == {"0", "0.5"}


def test_unknown_family_exits_2_naming_valid_families(tmp_path):
    path = write_config(tmp_path, {"family": "hull_white"})
    result = run("price", "--config", path)
    assert result.exit_code == 2
    for name in ALL_FAMILIES:
        assert name in result.output


@pytest.mark.parametrize("text, fragment", [("{\n  \"family\": vasicek\n}", "line 2"),
                                            ("[1, 2]", "top level"),
                                            ('{"family": "vasicek", "schema_version": 9}', "schema_version"),
                                            ('{"family": "vasicek", "params": {"kappa": [0.0]}}', "mean-reversion"),
                                            ('{"family": "vasicek", "params": {"speed": 1}}', "params"),
                                            ('{"family": "multicurve_jump", "calendar": "missing.csv"}', "does not exist"),
                                            ('{"family": "vasicek", "perturb": {"sigma": [1]}}', "perturb")])
def test_schema_violations_exit_2_with_location(tmp_path, text, fragment):
    path = tmp_path / "bad.json"
    path.write_text(text)
    result = run("check", "--config", path)
    assert result.exit_code == 2
    assert fragment in result.output


def test_missing_config_exits_2(tmp_path):
    result = run("price", "--config", tmp_path / "absent.json")
    assert result.exit_code == 2
    assert "cannot read" in result.output


def test_curve_snapshot_has_atoms_only_at_calendar_dates():
    result = run("curve", "--config", CONFIGS / "multicurve_jump.json")
    assert result.exit_code == 0
    rows = csv_rows(result.output)
    assert list(rows[0]) == ["tenor", "maturity", "density_value", "atom_value"]
    atoms = {float(r["maturity"]) for r in rows if r["atom_value"]}
    assert atoms == {1.0, 2.0, 3.0, 4.0}


def test_curve_for_flat_family_reports_constant_density():
    result = run("curve", "--config", CONFIGS / "flat_curve.json")
    rows = csv_rows(result.output)
    assert {(r["tenor"], r["density_value"]) for r in rows} == {("0", "0.029999999999999999"),
                                                               ("0.5", "0.035000000000000003")}


# ---------------------------------------------------------------------------
# check


def test_shipped_jump_model_check_exits_0():
    result = run("check", "--config", CONFIGS / "multicurve_jump.json")
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["schema_version"] == 1
    assert report["passed"] is True
    assert report["affine_failing"] == [] and report["hjm"]["failing"] == []


def test_perturbed_level_exits_1_naming_drift():
    result = run("check", "--config", CONFIGS / "multicurve_jump_perturbed.json")
    assert result.exit_code == 1
    assert "drift" in result.output.splitlines()[-1]
    report = json.loads(result.output[:result.output.rindex("}") + 1])
    assert "drift" in report["affine_failing"]
    assert report["affine"]["drift"]["max_abs_residual"] > 1e-4


def test_empty_tenor_set_checks_ois_only():
    result = run("check", "--config", CONFIGS / "vasicek.json")
    assert result.exit_code == 0
    report = json.loads(result.output)
    tenors = {p["tenor"] for c in report["hjm"]["conditions"].values() if c["worst_point"]
              for p in [c["worst_point"]] if "tenor" in p}
    assert tenors == {0.0}
    assert "null" in result.output and "NaN" not in result.output


def test_check_tolerance_flag_is_honoured():
    result = run("check", "--config", CONFIGS / "vasicek.json", "--tolerance", "1e-30")
    assert result.exit_code == 1
    result = run("check", "--config", CONFIGS / "vasicek.json", "--tolerance", "-1")
    assert result.exit_code == 2


def test_seed_outside_unsigned_64_bit_range_exits_2():
    result = run("check", "--config", CONFIGS / "vasicek.json", "--seed", "-1")
    assert result.exit_code == 2


def test_check_writes_report_file(tmp_path):
    out = tmp_path / "report.json"
    assert run("check", "--config", CONFIGS / "vasicek.json", "--out", out).exit_code == 0
    assert json.loads(out.read_text())["command"] == "check"


# ---------------------------------------------------------------------------
# simulate


def simulate_config(tmp_path, paths=300):
    config = shipped("multicurve_jump")
    config["calendar"] = str(CONFIGS / "calendar.csv")
    config["simulate"] = {"step": 0.25, "horizon": 1.5, "paths": paths, "check_times": 3}
    return write_config(tmp_path, config)


def test_simulate_twice_is_byte_identical(tmp_path):
    path = simulate_config(tmp_path)
    for name in ("a", "b"):
        assert run("simulate", "--config", path, "--seed", 42, "--out", tmp_path / name).exit_code == 0
    for file in ("ensemble.csv", "martingale.json"):
        assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()


def test_simulate_is_independent_of_thread_count(tmp_path):
    path = simulate_config(tmp_path)
    run("simulate", "--config", path, "--seed", 42, "--out", tmp_path / "one", "--threads", 1)
    run("simulate", "--config", path, "--seed", 42, "--out", tmp_path / "three", "--threads", 3)
    for file in ("ensemble.csv", "martingale.json"):
        assert (tmp_path / "one" / file).read_bytes() == (tmp_path / "three" / file).read_bytes()


def test_simulate_seed_changes_output(tmp_path):
    path = simulate_config(tmp_path)
    run("simulate", "--config", path, "--seed", 1, "--out", tmp_path / "a")
    run("simulate", "--config", path, "--seed", 2, "--out", tmp_path / "b")
    assert (tmp_path / "a" / "ensemble.csv").read_bytes() != (tmp_path / "b" / "ensemble.csv").read_bytes()


def test_simulate_outputs_have_left_limits_and_schema(tmp_path):
    path = simulate_config(tmp_path, paths=200)
    assert run("simulate", "--config", path, "--out", tmp_path / "o", "--paths", 150).exit_code == 0
    rows = csv_rows((tmp_path / "o" / "ensemble.csv").read_text())
    assert len({r["path"] for r in rows}) == 150
    assert {r["time"] for r in rows if r["limit"] == "left"} == {"1"}
    report = json.loads((tmp_path / "o" / "martingale.json").read_text())
    assert report["schema_version"] == 1 and report["n_paths"] == 150
    assert {a["asset"] for a in report["assets"]} == {"ois_bond(T=1.5)", "fra_leg(T=1.5,delta=0.5)"}


def test_vasicek_martingale_at_1e5_paths():
    with CliRunner().isolated_filesystem():
        result = run("simulate", "--config", CONFIGS / "vasicek.json", "--out", "run")
        assert result.exit_code == 0, result.output
        report = json.loads(Path("run/martingale.json").read_text())
        assert report["n_paths"] == 100_000
        assert report["max_abs_z"] <= 4.0
        exported = Path("run/ensemble.csv").read_text().count("\n") - 1
        assert exported == 1000 * 11


@pytest.mark.parametrize("paths", [0, -3])
def test_simulate_rejects_non_positive_paths(tmp_path, paths):
    result = run("simulate", "--config", CONFIGS / "vasicek.json", "--out", tmp_path, "--paths", paths)
    assert result.exit_code == 2
    assert "n_paths" in result.output


def test_simulate_needs_out_directory():
    result = run("simulate", "--config", CONFIGS / "vasicek.json", "--paths", 10)
    assert result.exit_code == 2


def test_simulate_detected_drift_exits_1(tmp_path):
    config = shipped("vasicek")
    config["perturb"] = {"drift": [0.5]}
    config["simulate"] = {"step": 0.1, "horizon": 1.0, "paths": 20000}
    result = run("simulate", "--config", write_config(tmp_path, config), "--out", tmp_path / "o")
    assert result.exit_code == 1
    assert "max |z|" in result.output


# ---------------------------------------------------------------------------
# embed


def market_config(tmp_path, **changes):
    config = shipped("market_model")
    config["market_model"].update(changes)
    return write_config(tmp_path, config, "market.json")


def test_three_date_embedding_is_reingested_by_check(tmp_path):
    result = run("embed", "--config", CONFIGS / "market_model.json", "--out", tmp_path)
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "embed_report.json").read_text())
    assert report["passed"] and report["schema_version"] == 1
    assert report["round_trip_max_relative_error"] <= 1e-6
    spec = json.loads((tmp_path / "embedded_spec.json").read_text())
    assert spec["family"] == "embedded_market_model"
    assert spec["embedded"]["settlement"] == [0.5, 1.0, 1.5]
    check = run("check", "--config", tmp_path / "embedded_spec.json")
    assert check.exit_code == 0, check.output
    assert json.loads(check.output)["emitted_tables_match"] is True


def test_tampered_embedded_spec_fails_check(tmp_path):
    run("embed", "--config", CONFIGS / "market_model.json", "--out", tmp_path)
    path = tmp_path / "embedded_spec.json"
    spec = json.loads(path.read_text())
    spec["embedded"]["initial_tenor_forwards"]["1"] += 1e-4
    path.write_text(json.dumps(spec))
    result = run("check", "--config", path)
    assert result.exit_code == 1
    report = json.loads(result.output[:result.output.rindex("}") + 1])
    assert report["table_mismatches"] and "initial_tenor_forwards.1" in report["table_mismatches"][0]


def test_embedding_domain_violation_exits_2(tmp_path):
    path = market_config(tmp_path, rate=[0.02, -1 / 0.5, 0.026, 0.03])
    result = run("embed", "--config", path, "--out", tmp_path / "o")
    assert result.exit_code == 2
    assert "embedding domain" in result.output


def test_single_date_embedding_succeeds(tmp_path):
    path = market_config(tmp_path, periods=1, forward=[0.01, 0.012], rate=[0.02, 0.022],
                         ois_vol=[[0.004, 0.0], [0.003, 0.001]], rate_vol=[[0.05, 0.01], [0.04, 0.02]])
    result = run("embed", "--config", path, "--out", tmp_path / "o")
    assert result.exit_code == 0, result.output
    spec = json.loads((tmp_path / "o" / "embedded_spec.json").read_text())
    assert spec["embedded"]["settlement"] == [0.5]
    assert run("check", "--config", tmp_path / "o" / "embedded_spec.json").exit_code == 0


def test_embed_rejects_affine_family(tmp_path):
    result = run("embed", "--config", CONFIGS / "vasicek.json", "--out", tmp_path)
    assert result.exit_code == 2


def test_market_model_check_passes():
    result = run("check", "--config", CONFIGS / "market_model.json")
    assert result.exit_code == 0
    report = json.loads(result.output)
    assert report["market_conditions"]["failing"] == []
    assert np.isfinite(report["round_trip_max_relative_error"])


def test_module_entry_point_runs():
    import subprocess
    import sys

    result = subprocess.run([sys.executable, "-m", "multicurve", "price", "--config",
                             str(CONFIGS / "flat_curve.json")], capture_output=True, text=True)
    assert result.returncode == 0
    assert result.stdout.startswith("tenor,maturity,bond")
