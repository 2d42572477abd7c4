"""End-to-end command-line sweeps on the shipped dataset."""

from __future__ import annotations

import csv
import json

import pytest

from rvpp import cli, strategy_budgets
from toys import solve_rvpp

RESULT_FILES = ("results.csv", "plot_traded_energy.csv", "plot_reserves.csv", "plot_soc.csv")


def read_rows(out_dir) -> list[dict]:
    with open(out_dir / "results.csv", newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def case1_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("case1")
    code = cli.main(["--case", "1", "--season", "winter", "--out", str(out)])
    return code, out


def test_case1_exit_code_and_files(case1_run):
    code, out = case1_run
    assert code == 0
    for name in RESULT_FILES + ("run_manifest.json",):
        assert (out / name).exists()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["cells_total"] == 2
    assert manifest["cells_failed"] == 0
    assert all(c["status"] == "ok" for c in manifest["cells"])
    assert manifest["wall_seconds"] > 0


def test_case1_rows_match_a_direct_solve(case1_run, bundle):
    _, out = case1_run
    rows = read_rows(out)
    assert [r["strategy"] for r in rows] == ["deterministic", "optimistic"]
    portfolio, scenario = bundle.cell("winter", "favorable")
    det = solve_rvpp(portfolio, scenario)
    assert float(rows[0]["objective"]) == pytest.approx(det.objective_value, rel=1e-5)
    rob = solve_rvpp(portfolio, scenario, strategy_budgets("optimistic", portfolio))
    assert float(rows[1]["objective"]) == pytest.approx(rob.objective_value, rel=1e-5)
    sold = det.p_da[det.p_da > 0].sum() * scenario.grid.delta_t
    assert float(rows[0]["sold_mwh"]) == pytest.approx(sold, rel=1e-5)


def test_case1_emits_per_unit_series(case1_run):
    _, out = case1_run
    with open(out / "plot_traded_energy.csv", newline="") as fh:
        devices = {r["device"] for r in csv.DictReader(fh)}
    assert "market" in devices
    assert "hydro" in devices and "wind_farm" in devices
    with open(out / "plot_soc.csv", newline="") as fh:
        soc_rows = list(csv.DictReader(fh))
    assert {r["device"] for r in soc_rows} == {"csp_plant_store"}
    periods = [int(r["period"]) for r in soc_rows if r["strategy"] == "deterministic"]
    assert periods[0] == 0 and periods[-1] == 24


def test_identical_runs_are_byte_identical(case1_run, tmp_path):
    _, first = case1_run
    again = tmp_path / "again"
    assert cli.main(["--case", "1", "--season", "winter", "--out", str(again)]) == 0
    for name in RESULT_FILES:
        assert (first / name).read_bytes() == (again / name).read_bytes(), name


def test_case3_row_arithmetic(tmp_path, bundle):
    out = tmp_path / "case3"
    code = cli.main(
        ["--case", "3", "--season", "winter", "--strategy", "optimistic", "--out", str(out)]
    )
    assert code == 0
    rows = {r["configuration"]: r for r in read_rows(out)}
    full = rows["full"]
    # Columns are %.6g formatted, so reconstructed sums carry small rounding.
    assert float(full["gap"]) == pytest.approx(
        float(full["rvpp_profit"]) - float(full["sum_individual"]), abs=0.5
    )
    unit_cols = [k for k in full if k.startswith("unit_") and full[k]]
    assert len(unit_cols) == len(bundle.cell("winter", "favorable")[0].unit_names())
    total = sum(float(full[k]) for k in unit_cols)
    assert total == pytest.approx(float(full["sum_individual"]), abs=1.0)

    # Removing flexible demand and scaling it to zero are the same portfolio.
    assert float(rows["no_fd"]["rvpp_profit"]) == pytest.approx(
        float(rows["fd_000"]["rvpp_profit"]), abs=0.5
    )
    # The sized fleet rows ride along on the full configuration.
    assert int(full["module_count"]) >= 1
    assert float(full["fleet_e_max_mwh"]) == pytest.approx(
        int(full["module_count"]) * 1.0, abs=1e-9
    )


def test_rejects_bad_flags(tmp_path):
    assert cli.main(["--jobs", "0", "--out", str(tmp_path / "x")]) == 2
    assert cli.main(["--fd-scale", "-5", "--out", str(tmp_path / "y")]) == 2
    assert cli.main(["--scenario", "/nonexistent.yaml", "--out", str(tmp_path / "z")]) == 2
    assert (
        cli.main(["--case", "3", "--strategy", "deterministic", "--out", str(tmp_path / "w")]) == 2
    )


def test_case4_needs_a_storage_module(tmp_path, bundle):
    import copy

    from rvpp import save_scenario

    raw = copy.deepcopy(bundle.raw)
    del raw["es_module"]
    scenario_path = tmp_path / "no_es.yaml"
    save_scenario(raw, scenario_path)
    out = tmp_path / "case4"
    code = cli.main(
        [
            "--case", "4",
            "--season", "winter",
            "--strategy", "optimistic",
            "--scenario", str(scenario_path),
            "--out", str(out),
        ]
    )
    assert code == 1
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["cells_failed"] == 1
    assert "storage module" in manifest["cells"][0]["error"]
