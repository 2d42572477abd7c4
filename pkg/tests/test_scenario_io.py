"""Scenario file parsing, the shipped dataset, and result-file writing."""

from __future__ import annotations

import copy
import csv

import pytest

from rvpp import (
    FdUnit,
    Portfolio,
    ResultRow,
    ResultsTable,
    ScenarioFormatError,
    SeriesRow,
    default_scenario_path,
    load_scenario,
    save_scenario,
    scale_flexible_demand,
    write_results,
)
from rvpp.datasets import default_scenario_raw
from toys import wind


def test_shipped_dataset_loads_every_cell(bundle):
    assert bundle.seasons == ("winter", "spring", "summer", "autumn")
    assert bundle.regimes == ("favorable", "unfavorable")
    assert len(bundle.cells) == 8
    assert bundle.grid.period_count == 24
    assert bundle.grid.delta_t == 1.0


def test_shipped_nameplates(bundle):
    portfolio, _ = bundle.cell("winter", "favorable")
    hydro, biomass = portfolio.drs
    assert (hydro.p_max, hydro.p_min) == (50.0, 10.0)
    assert (hydro.startup_cost, hydro.shutdown_cost, hydro.op_cost) == (100.0, 50.0, 12.5)
    assert (hydro.min_up, hydro.min_down) == (1, 0)
    assert (biomass.p_max, biomass.p_min) == (10.0, 2.0)
    assert (biomass.startup_cost, biomass.shutdown_cost, biomass.op_cost) == (300.0, 150.0, 60.0)
    assert (biomass.min_up, biomass.min_down) == (3, 3)

    wind_farm, pv = portfolio.ndrs
    assert (wind_farm.technology, pv.technology) == ("wind", "solar")
    assert (wind_farm.op_cost, pv.op_cost) == (15.0, 10.0)
    assert max(wind_farm.forecast_upper) <= 50.0

    csp = portfolio.csp[0]
    assert (csp.turbine_p_max, csp.turbine_p_min) == (55.0, 11.0)
    assert csp.turbine_eff == pytest.approx(55.0 / 140.0, abs=1e-6)
    assert (csp.startup_loss, csp.op_cost, csp.min_up, csp.min_down) == (0.2, 25.0, 3, 2)
    assert (csp.store.e_max, csp.store.e_min) == (1100.0, 110.0)
    assert (csp.store.charge_p_max, csp.store.discharge_p_max) == (140.0, 115.0)

    load = portfolio.fd[0]
    assert len(load.profiles) == 3
    assert load.flexibility_margin == 0.10

    es = bundle.es_module
    assert (es.charge_p_max, es.discharge_p_max) == (0.5, 0.5)
    assert (es.e_max, es.e_min) == (1.0, 0.1)
    assert (es.charge_eff, es.discharge_eff, es.op_cost) == (0.95, 0.95, 30.0)


def test_regime_changes_limits_and_deviations(bundle):
    fav_p, fav_s = bundle.cell("winter", "favorable")
    unf_p, unf_s = bundle.cell("winter", "unfavorable")
    assert fav_p.drs[0].daily_energy_limit == 1164.0
    assert unf_p.drs[0].daily_energy_limit == 804.0
    assert bundle.cell("summer", "unfavorable")[0].drs[0].daily_energy_limit == 420.0
    # Unfavorable deviations dominate the favorable ones period by period.
    for fav_u, unf_u in zip(fav_p.ndrs, unf_p.ndrs):
        assert all(b >= a for a, b in zip(fav_u.forecast_deviation, unf_u.forecast_deviation))
    assert fav_s.regime == "favorable" and unf_s.regime == "unfavorable"
    assert fav_s.dam_price == unf_s.dam_price


def test_unknown_cell_rejected(bundle):
    with pytest.raises(ScenarioFormatError, match="no cell for season='monsoon'"):
        bundle.cell("monsoon", "favorable")


def test_save_load_round_trip(tmp_path, bundle):
    out = tmp_path / "copy.yaml"
    save_scenario(bundle, out)
    assert out.read_bytes() == default_scenario_path().read_bytes()
    again = load_scenario(out)
    assert again.cell("spring", "unfavorable") == bundle.cell("spring", "unfavorable")
    assert again.es_module == bundle.es_module


def test_generator_reproduces_the_shipped_file(tmp_path):
    out = tmp_path / "regen.yaml"
    save_scenario(default_scenario_raw(), out)
    assert out.read_bytes() == default_scenario_path().read_bytes()


def broken_copy(bundle) -> dict:
    return copy.deepcopy(bundle.raw)


def test_wrong_vector_length_names_the_field(tmp_path, bundle):
    raw = broken_copy(bundle)
    raw["prices"]["winter"]["dam_price"] = raw["prices"]["winter"]["dam_price"][:23]
    path = tmp_path / "bad.yaml"
    save_scenario(raw, path)
    with pytest.raises(ScenarioFormatError, match=r"prices\.winter\.dam_price: expected 24 entries, got 23"):
        load_scenario(path)


def test_missing_regime_deviation_names_the_field(tmp_path, bundle):
    raw = broken_copy(bundle)
    wf = [u for u in raw["units"] if u["name"] == "wind_farm"][0]
    del wf["forecast_deviation"]["summer"]["unfavorable"]
    path = tmp_path / "bad.yaml"
    save_scenario(raw, path)
    with pytest.raises(ScenarioFormatError, match=r"forecast_deviation\.summer\.unfavorable"):
        load_scenario(path)


def test_unknown_unit_class_rejected(tmp_path, bundle):
    raw = broken_copy(bundle)
    raw["units"][0]["class"] = "fusion"
    path = tmp_path / "bad.yaml"
    save_scenario(raw, path)
    with pytest.raises(ScenarioFormatError, match="unknown unit class 'fusion'"):
        load_scenario(path)


def test_schema_version_checked(tmp_path, bundle):
    raw = broken_copy(bundle)
    raw["schema_version"] = 2
    path = tmp_path / "bad.yaml"
    save_scenario(raw, path)
    with pytest.raises(ScenarioFormatError, match="schema_version"):
        load_scenario(path)


def test_missing_file_reported():
    with pytest.raises(ScenarioFormatError, match="not found"):
        load_scenario("/nonexistent/scenario.yaml")


def test_cell_validation_failure_names_the_cell(tmp_path, bundle):
    raw = broken_copy(bundle)
    wf = [u for u in raw["units"] if u["name"] == "wind_farm"][0]
    wf["forecast_deviation"]["winter"]["unfavorable"] = [999.0] * 24
    path = tmp_path / "bad.yaml"
    save_scenario(raw, path)
    with pytest.raises(ScenarioFormatError, match=r"\[winter/unfavorable\].*forecast_deviation"):
        load_scenario(path)


# --- flexible-demand scaling ------------------------------------------------


def test_scale_flexible_demand():
    T = 4
    load = FdUnit("ld", profiles=((10.0,) * T, (20.0,) * T), deviation=(1.0,) * T)
    portfolio = Portfolio(ndrs=(wind(T),), fd=(load,))
    half = scale_flexible_demand(portfolio, 0.5)
    assert half.fd[0].profiles == (((5.0,) * T), (10.0,) * T)
    assert half.fd[0].deviation == (0.5,) * T
    assert half.fd[0].p_min == pytest.approx(load.p_min * 0.5)
    assert half.fd[0].p_max == pytest.approx(load.p_max * 0.5)
    assert half.ndrs == portfolio.ndrs

    none = scale_flexible_demand(portfolio, 0.0)
    assert none.fd == ()
    with pytest.raises(ValueError, match="nonnegative"):
        scale_flexible_demand(portfolio, -1.0)


# --- result files -----------------------------------------------------------


def tiny_table() -> ResultsTable:
    table = ResultsTable()
    table.rows.append(
        ResultRow("1", "winter", "favorable", "deterministic", "full", {"objective": 31.5875, "sold_mwh": 0.0})
    )
    table.rows.append(
        ResultRow("1", "winter", "favorable", "optimistic", "full", {"objective": -0.0, "gap": 1234567.0})
    )
    table.series.append(
        SeriesRow("1", "winter", "favorable", "deterministic", "full", "traded", "market", (1.0, -2.0))
    )
    table.series.append(
        SeriesRow("1", "winter", "favorable", "deterministic", "full", "soc", "es_fleet", (0.1, 0.575, 0.1))
    )
    table.series.append(
        SeriesRow("1", "winter", "favorable", "deterministic", "full", "reserve_up", "market", (0.5, 0.0))
    )
    return table


def test_write_results_layout(tmp_path):
    files = write_results(tiny_table(), tmp_path)
    assert sorted(f.name for f in files) == [
        "plot_reserves.csv",
        "plot_soc.csv",
        "plot_traded_energy.csv",
        "results.csv",
    ]
    with open(tmp_path / "results.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["case", "season", "regime", "strategy", "configuration", "objective", "sold_mwh", "gap"]
    assert rows[1][5] == "31.5875"
    assert rows[1][7] == ""
    # Negative zero collapses to plain zero; six significant digits elsewhere.
    assert rows[2][5] == "0"
    assert rows[2][7] == "1.23457e+06"

    with open(tmp_path / "plot_soc.csv", newline="") as fh:
        soc = list(csv.reader(fh))
    assert soc[0] == ["case", "season", "regime", "strategy", "configuration", "kind", "device", "period", "value"]
    # The state of charge starts at period 0 (the carried-in level).
    assert [r[7:9] for r in soc[1:]] == [["0", "0.1"], ["1", "0.575"], ["2", "0.1"]]
    with open(tmp_path / "plot_traded_energy.csv", newline="") as fh:
        traded = list(csv.reader(fh))
    assert [r[7] for r in traded[1:]] == ["1", "2"]


def test_write_results_deterministic_bytes(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    write_results(tiny_table(), a)
    write_results(tiny_table(), b)
    for name in ("results.csv", "plot_traded_energy.csv", "plot_reserves.csv", "plot_soc.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_write_results_rejects_empty_and_non_finite(tmp_path):
    with pytest.raises(ValueError, match="no rows"):
        write_results(ResultsTable(), tmp_path)
    bad = tiny_table()
    bad.rows[0].values["objective"] = float("nan")
    with pytest.raises(ValueError, match="non-finite"):
        write_results(bad, tmp_path)
