"""Scenario file loading/writing and deterministic results output.

The scenario file is one YAML document holding the portfolio, per-season
price curves, per-season/per-regime forecast deviations, seasonal energy
limits, and the storage module used for equivalence sizing.  Loading builds
one (Portfolio, MarketScenario) pair per season/regime cell and validates
every cell; the canonical parsed form round-trips exactly through
save_scenario.

Result files are plain CSV with all numbers at 6 significant digits and rows
in a fixed sort order, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .domain import (
    REGIMES,
    SEASONS,
    CspUnit,
    DrsUnit,
    EsUnit,
    FdUnit,
    MarketScenario,
    NdrsUnit,
    PeriodGrid,
    Portfolio,
    ThermalStoreParams,
    freeze_deviation_table,
    freeze_limit_table,
    validate_portfolio,
)

_PRICE_KEYS = (
    "dam_price",
    "dam_price_down_dev",
    "dam_price_up_dev",
    "sr_up_price",
    "sr_up_price_dev",
    "sr_dn_price",
    "sr_dn_price_dev",
)


class ScenarioFormatError(ValueError):
    """Malformed scenario file; the message names the offending field path."""


@dataclass
class ScenarioBundle:
    """Everything a run needs, keyed by (season, regime)."""

    path: str
    description: str
    grid: PeriodGrid
    seasons: tuple[str, ...]
    regimes: tuple[str, ...]
    cells: dict[tuple[str, str], tuple[Portfolio, MarketScenario]]
    es_module: EsUnit | None
    raw: dict = field(repr=False, default_factory=dict)

    def cell(self, season: str, regime: str) -> tuple[Portfolio, MarketScenario]:
        try:
            return self.cells[(season, regime)]
        except KeyError:
            raise ScenarioFormatError(
                f"{self.path}: no cell for season={season!r}, regime={regime!r}"
            ) from None


def default_scenario_path() -> Path:
    return Path(str(resources.files("rvpp").joinpath("data/default_scenario.yaml")))


def _need(mapping: dict, key: str, path: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ScenarioFormatError(f"{path}.{key}: missing")
    return mapping[key]


def _floats(value, path: str, length: int | None = None) -> list[float]:
    if not isinstance(value, (list, tuple)):
        raise ScenarioFormatError(f"{path}: expected a list of numbers")
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ScenarioFormatError(f"{path}: expected a list of numbers") from None
    if length is not None and len(out) != length:
        raise ScenarioFormatError(f"{path}: expected {length} entries, got {len(out)}")
    return out


def _per_season(mapping, seasons, path: str, T: int) -> dict[str, list[float]]:
    out = {}
    for season in seasons:
        out[season] = _floats(_need(mapping, season, path), f"{path}.{season}", T)
    return out


def _per_season_regime(mapping, seasons, regimes, path: str, T: int) -> dict[str, dict[str, list[float]]]:
    out: dict[str, dict[str, list[float]]] = {}
    for season in seasons:
        block = _need(mapping, season, path)
        out[season] = {}
        for regime in regimes:
            out[season][regime] = _floats(
                _need(block, regime, f"{path}.{season}"), f"{path}.{season}.{regime}", T
            )
    return out


def load_scenario(path: str | Path) -> ScenarioBundle:
    """Parse, normalize, and validate a scenario file.

    Raises ScenarioFormatError naming the first offending field (including
    per-cell portfolio/scenario validation failures).
    """
    path = Path(path)
    if not path.exists():
        raise ScenarioFormatError(f"scenario file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioFormatError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioFormatError(f"{path}: top level must be a mapping")

    version = doc.get("schema_version")
    if version != 1:
        raise ScenarioFormatError(f"{path}: schema_version must be 1, got {version!r}")
    description = str(doc.get("description", ""))
    grid_block = _need(doc, "grid", str(path))
    T = int(_need(grid_block, "period_count", "grid"))
    dt = float(_need(grid_block, "delta_t", "grid"))
    grid = PeriodGrid(T, dt)

    seasons = tuple(str(s) for s in doc.get("seasons", list(SEASONS)))
    regimes = tuple(str(r) for r in doc.get("regimes", list(REGIMES)))
    for s in seasons:
        if s not in SEASONS:
            raise ScenarioFormatError(f"seasons: unknown season {s!r}")
    for r in regimes:
        if r not in REGIMES:
            raise ScenarioFormatError(f"regimes: unknown regime {r!r}")

    prices_block = _need(doc, "prices", str(path))
    prices: dict[str, dict[str, list[float]]] = {}
    for season in seasons:
        block = _need(prices_block, season, "prices")
        prices[season] = {
            key: _floats(_need(block, key, f"prices.{season}"), f"prices.{season}.{key}", T)
            for key in _PRICE_KEYS
        }

    units = _need(doc, "units", str(path))
    if not isinstance(units, list) or not units:
        raise ScenarioFormatError("units: expected a non-empty list")

    limits_block = doc.get("energy_limits", {}) or {}
    limit_table: dict[str, dict[str, dict[str, float]]] = {}
    for unit_name, seasons_map in limits_block.items():
        limit_table[str(unit_name)] = {}
        for season, regs in seasons_map.items():
            if season not in seasons:
                raise ScenarioFormatError(f"energy_limits.{unit_name}: unknown season {season!r}")
            limit_table[str(unit_name)][season] = {
                str(reg): float(v) for reg, v in regs.items()
            }

    # Per-season unit construction data.
    drs_specs = []
    ndrs_specs = []
    csp_specs = []
    fd_specs = []
    deviation_tables: dict[str, dict[str, dict[str, list[float]]]] = {}
    for i, u in enumerate(units):
        upath = f"units[{i}]"
        cls = _need(u, "class", upath)
        name = str(_need(u, "name", upath))
        if cls == "drs":
            drs_specs.append(
                DrsUnit(
                    name=name,
                    p_max=float(_need(u, "p_max", upath)),
                    p_min=float(_need(u, "p_min", upath)),
                    startup_cost=float(_need(u, "startup_cost", upath)),
                    shutdown_cost=float(_need(u, "shutdown_cost", upath)),
                    op_cost=float(_need(u, "op_cost", upath)),
                    min_up=int(u.get("min_up", 0)),
                    min_down=int(u.get("min_down", 0)),
                    daily_energy_limit=(
                        float(u["daily_energy_limit"]) if u.get("daily_energy_limit") is not None else None
                    ),
                )
            )
        elif cls == "ndrs":
            upper = _per_season(_need(u, "forecast_upper", upath), seasons, f"{upath}.forecast_upper", T)
            dev = _per_season_regime(
                _need(u, "forecast_deviation", upath), seasons, regimes, f"{upath}.forecast_deviation", T
            )
            deviation_tables[name] = dev
            ndrs_specs.append(
                (
                    NdrsUnit(
                        name=name,
                        technology=str(_need(u, "technology", upath)),
                        p_min=float(_need(u, "p_min", upath)),
                        op_cost=float(_need(u, "op_cost", upath)),
                        forecast_upper=[0.0] * T,
                        forecast_deviation=[0.0] * T,
                    ),
                    upper,
                    dev,
                )
            )
        elif cls == "csp":
            store_block = _need(u, "store", upath)
            upper = _per_season(_need(u, "sf_upper", upath), seasons, f"{upath}.sf_upper", T)
            dev = _per_season_regime(
                _need(u, "sf_deviation", upath), seasons, regimes, f"{upath}.sf_deviation", T
            )
            deviation_tables[name] = dev
            csp_specs.append(
                (
                    CspUnit(
                        name=name,
                        turbine_p_max=float(_need(u, "turbine_p_max", upath)),
                        turbine_p_min=float(_need(u, "turbine_p_min", upath)),
                        turbine_eff=float(_need(u, "turbine_eff", upath)),
                        startup_loss=float(_need(u, "startup_loss", upath)),
                        op_cost=float(_need(u, "op_cost", upath)),
                        min_up=int(u.get("min_up", 0)),
                        min_down=int(u.get("min_down", 0)),
                        sf_upper=[0.0] * T,
                        sf_deviation=[0.0] * T,
                        store=ThermalStoreParams(
                            e_min=float(_need(store_block, "e_min", f"{upath}.store")),
                            e_max=float(_need(store_block, "e_max", f"{upath}.store")),
                            charge_p_max=float(_need(store_block, "charge_p_max", f"{upath}.store")),
                            discharge_p_max=float(_need(store_block, "discharge_p_max", f"{upath}.store")),
                            charge_eff=float(_need(store_block, "charge_eff", f"{upath}.store")),
                            discharge_eff=float(_need(store_block, "discharge_eff", f"{upath}.store")),
                        ),
                    ),
                    upper,
                    dev,
                )
            )
        elif cls == "fd":
            profiles = _need(u, "profiles", upath)
            if not isinstance(profiles, list) or not profiles:
                raise ScenarioFormatError(f"{upath}.profiles: expected a non-empty list")
            dev_block = _need(u, "deviation", upath)
            dev = {
                regime: _floats(
                    _need(dev_block, regime, f"{upath}.deviation"), f"{upath}.deviation.{regime}", T
                )
                for regime in regimes
            }
            deviation_tables[name] = {s: dev for s in seasons}
            fd_specs.append(
                (
                    {
                        "name": name,
                        "profiles": [
                            _floats(p, f"{upath}.profiles[{j}]", T) for j, p in enumerate(profiles)
                        ],
                        "flexibility_margin": float(u.get("flexibility_margin", 0.10)),
                        "p_min": float(u["p_min"]) if u.get("p_min") is not None else None,
                        "p_max": float(u["p_max"]) if u.get("p_max") is not None else None,
                    },
                    dev,
                )
            )
        else:
            raise ScenarioFormatError(f"{upath}.class: unknown unit class {cls!r}")

    es_module = None
    if doc.get("es_module") is not None:
        e = doc["es_module"]
        es_module = EsUnit(
            name=str(_need(e, "name", "es_module")),
            charge_p_max=float(_need(e, "charge_p_max", "es_module")),
            discharge_p_max=float(_need(e, "discharge_p_max", "es_module")),
            e_max=float(_need(e, "e_max", "es_module")),
            e_min=float(_need(e, "e_min", "es_module")),
            charge_eff=float(_need(e, "charge_eff", "es_module")),
            discharge_eff=float(_need(e, "discharge_eff", "es_module")),
            op_cost=float(_need(e, "op_cost", "es_module")),
            charge_p_min=float(e.get("charge_p_min", 0.0)),
            discharge_p_min=float(e.get("discharge_p_min", 0.0)),
        )

    frozen_limits = freeze_limit_table(limit_table) if limit_table else None
    cells: dict[tuple[str, str], tuple[Portfolio, MarketScenario]] = {}
    for season in seasons:
        dev_table = {
            name: {regime: tuple(devs[season][regime]) for regime in regimes}
            for name, devs in deviation_tables.items()
        }
        frozen_dev = freeze_deviation_table(dev_table) if dev_table else None
        for regime in regimes:
            drs_units = []
            for base in drs_specs:
                limit = base.daily_energy_limit
                row = limit_table.get(base.name, {}).get(season)
                if row is not None:
                    if regime not in row:
                        raise ScenarioFormatError(
                            f"energy_limits.{base.name}.{season}: missing regime {regime!r}"
                        )
                    limit = row[regime]
                drs_units.append(
                    DrsUnit(
                        name=base.name,
                        p_max=base.p_max,
                        p_min=base.p_min,
                        startup_cost=base.startup_cost,
                        shutdown_cost=base.shutdown_cost,
                        op_cost=base.op_cost,
                        min_up=base.min_up,
                        min_down=base.min_down,
                        daily_energy_limit=limit,
                        initially_on=base.initially_on,
                    )
                )
            ndrs_units = [
                NdrsUnit(
                    name=base.name,
                    technology=base.technology,
                    p_min=base.p_min,
                    op_cost=base.op_cost,
                    forecast_upper=upper[season],
                    forecast_deviation=dev[season][regime],
                )
                for base, upper, dev in ndrs_specs
            ]
            csp_units = [
                CspUnit(
                    name=base.name,
                    turbine_p_max=base.turbine_p_max,
                    turbine_p_min=base.turbine_p_min,
                    turbine_eff=base.turbine_eff,
                    startup_loss=base.startup_loss,
                    op_cost=base.op_cost,
                    min_up=base.min_up,
                    min_down=base.min_down,
                    sf_upper=upper[season],
                    sf_deviation=dev[season][regime],
                    store=base.store,
                    initially_on=base.initially_on,
                )
                for base, upper, dev in csp_specs
            ]
            fd_units = [FdUnit(deviation=dev[regime], **base) for base, dev in fd_specs]
            portfolio = Portfolio(
                drs=tuple(drs_units),
                ndrs=tuple(ndrs_units),
                csp=tuple(csp_units),
                fd=tuple(fd_units),
            )
            scenario = MarketScenario(
                grid=grid,
                season=season,
                regime=regime,
                regime_deviation_table=frozen_dev,
                seasonal_limit_table=frozen_limits,
                **{key: prices[season][key] for key in _PRICE_KEYS},
            )
            violations = validate_portfolio(portfolio, scenario)
            if violations:
                raise ScenarioFormatError(
                    f"{path} [{season}/{regime}]: " + "; ".join(violations[:5])
                )
            cells[(season, regime)] = (portfolio, scenario)

    return ScenarioBundle(
        path=str(path),
        description=description,
        grid=grid,
        seasons=seasons,
        regimes=regimes,
        cells=cells,
        es_module=es_module,
        raw=doc,
    )


def save_scenario(bundle_or_raw, path: str | Path) -> None:
    """Write the canonical YAML form (lossless float repr, stable ordering)."""
    raw = bundle_or_raw.raw if isinstance(bundle_or_raw, ScenarioBundle) else bundle_or_raw
    text = yaml.safe_dump(raw, sort_keys=False, default_flow_style=None, width=100000)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def scale_flexible_demand(portfolio: Portfolio, factor: float) -> Portfolio:
    """Scale every flexible-demand unit's size by factor (0 drops them)."""
    if factor < 0:
        raise ValueError("flexible-demand scale factor must be nonnegative")
    if factor == 0:
        return Portfolio(drs=portfolio.drs, ndrs=portfolio.ndrs, csp=portfolio.csp, fd=())
    scaled = tuple(
        FdUnit(
            name=u.name,
            profiles=[[v * factor for v in prof] for prof in u.profiles],
            deviation=[v * factor for v in u.deviation],
            p_min=u.p_min * factor,
            p_max=u.p_max * factor,
            flexibility_margin=u.flexibility_margin,
        )
        for u in portfolio.fd
    )
    return Portfolio(drs=portfolio.drs, ndrs=portfolio.ndrs, csp=portfolio.csp, fd=scaled)


@dataclass
class ResultRow:
    case: str
    season: str
    regime: str
    strategy: str
    configuration: str
    values: dict[str, float]


@dataclass
class SeriesRow:
    """One per-period curve for the plot files (kind: traded, reserve_up,
    reserve_dn, or soc)."""

    case: str
    season: str
    regime: str
    strategy: str
    configuration: str
    kind: str
    device: str
    values: tuple[float, ...]


@dataclass
class ResultsTable:
    rows: list[ResultRow] = field(default_factory=list)
    series: list[SeriesRow] = field(default_factory=list)


def _fmt6(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"non-finite value in results: {v}")
    if v == 0:
        return "0"
    return f"{v:.6g}"


_SEASON_ORDER = {s: i for i, s in enumerate(SEASONS)}
_REGIME_ORDER = {r: i for i, r in enumerate(REGIMES)}
_STRATEGY_ORDER = {"deterministic": 0, "optimistic": 1, "balanced": 2, "pessimistic": 3}


def _row_key(r) -> tuple:
    return (
        r.case,
        _SEASON_ORDER.get(r.season, 99),
        _REGIME_ORDER.get(r.regime, 99),
        _STRATEGY_ORDER.get(r.strategy, 99),
        r.strategy,
        r.configuration,
    )


def write_results(table: ResultsTable, out_dir: str | Path) -> list[Path]:
    """Write results.csv plus the three per-period plot files.

    Rows are sorted deterministically and all numbers are rendered at six
    significant digits, so the outputs are byte-identical across repeated
    runs on the same inputs.  Raises ValueError on an empty table or any
    non-finite value.
    """
    if not table.rows:
        raise ValueError("results table has no rows")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    keys: list[str] = []
    for row in table.rows:
        for k in row.values:
            if k not in keys:
                keys.append(k)
    base_cols = ["case", "season", "regime", "strategy", "configuration"]
    written: list[Path] = []

    results_path = out_dir / "results.csv"
    with open(results_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(base_cols + keys)
        for row in sorted(table.rows, key=_row_key):
            cells = [row.case, row.season, row.regime, row.strategy, row.configuration]
            cells += [_fmt6(row.values[k]) if k in row.values else "" for k in keys]
            w.writerow(cells)
    written.append(results_path)

    for kind_file, kinds in (
        ("plot_traded_energy.csv", ("traded",)),
        ("plot_reserves.csv", ("reserve_up", "reserve_dn")),
        ("plot_soc.csv", ("soc",)),
    ):
        path = out_dir / kind_file
        rows = [s for s in table.series if s.kind in kinds]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(base_cols + ["kind", "device", "period", "value"])
            for s in sorted(rows, key=lambda s: (_row_key(s), s.kind, s.device)):
                # SOC curves carry T+1 boundary points and start at period 0.
                first = 0 if s.kind == "soc" else 1
                for t, v in enumerate(s.values):
                    w.writerow(
                        [s.case, s.season, s.regime, s.strategy, s.configuration, s.kind, s.device, t + first, _fmt6(v)]
                    )
        written.append(path)
    return written
