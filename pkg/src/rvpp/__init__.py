"""Renewable virtual power plant scheduling and storage-equivalence sizing.

The package builds mixed-integer linear models for a portfolio of renewable
units (plus flexible demand) and for a fleet of identical storage modules,
both trading day-ahead energy and secondary reserve capacity.  Price and
quantity uncertainty is handled with integer budgets; a solver-free oracle
evaluates worst cases and audits schedules; the sizing loop finds the
smallest storage fleet matching the portfolio's aggregation advantage.
"""

from .backends import (
    BACKEND_ENV_VAR,
    BackendError,
    LpTextBackend,
    ScipyHighsBackend,
    backend_factory,
    get_backend,
    parse_lp_text,
)
from .domain import (
    REGIMES,
    SEASONS,
    STRATEGIES,
    ZERO_BUDGETS,
    BudgetSet,
    CspUnit,
    DrsUnit,
    EsUnit,
    FdUnit,
    MarketScenario,
    NdrsUnit,
    PeriodGrid,
    Portfolio,
    ThermalStoreParams,
    apply_regime,
    strategy_budgets,
    validate_budgets,
    validate_portfolio,
)
from .milp import (
    Constraint,
    LinearExpression,
    Model,
    ModelError,
    Solution,
    Variable,
    export_lp_text,
    relaxation_probe,
    solve,
)
from .oracle import (
    Realization,
    audit_robust_feasibility,
    budget_subsets,
    replay_schedule,
    worst_case_profit,
)
from .scenario_io import (
    ResultRow,
    ResultsTable,
    ScenarioBundle,
    ScenarioFormatError,
    SeriesRow,
    default_scenario_path,
    load_scenario,
    save_scenario,
    scale_flexible_demand,
    write_results,
)
from .scheduler import (
    DecodeError,
    ModelBuildError,
    RobustArtifacts,
    RvppSchedule,
    build_deterministic_rvpp,
    build_robust_rvpp,
    extract_rvpp_schedule,
)
from .sizing import (
    GapReport,
    SizingError,
    SizingResult,
    aggregation_gap,
    individual_profit,
    price_only_budgets,
    size_es_to_match,
)
from .storage import (
    EsFleet,
    EsSchedule,
    build_deterministic_es,
    build_robust_es,
    extract_es_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_ENV_VAR",
    "BackendError",
    "BudgetSet",
    "Constraint",
    "CspUnit",
    "DecodeError",
    "DrsUnit",
    "EsFleet",
    "EsSchedule",
    "EsUnit",
    "FdUnit",
    "GapReport",
    "LinearExpression",
    "LpTextBackend",
    "MarketScenario",
    "Model",
    "ModelBuildError",
    "ModelError",
    "NdrsUnit",
    "PeriodGrid",
    "Portfolio",
    "REGIMES",
    "Realization",
    "ResultRow",
    "ResultsTable",
    "RobustArtifacts",
    "RvppSchedule",
    "SEASONS",
    "STRATEGIES",
    "ScenarioBundle",
    "ScenarioFormatError",
    "ScipyHighsBackend",
    "SeriesRow",
    "SizingError",
    "SizingResult",
    "Solution",
    "ThermalStoreParams",
    "Variable",
    "ZERO_BUDGETS",
    "apply_regime",
    "audit_robust_feasibility",
    "aggregation_gap",
    "backend_factory",
    "budget_subsets",
    "build_deterministic_es",
    "build_deterministic_rvpp",
    "build_robust_es",
    "build_robust_rvpp",
    "default_scenario_path",
    "export_lp_text",
    "extract_es_schedule",
    "extract_rvpp_schedule",
    "get_backend",
    "individual_profit",
    "load_scenario",
    "parse_lp_text",
    "price_only_budgets",
    "relaxation_probe",
    "replay_schedule",
    "save_scenario",
    "scale_flexible_demand",
    "size_es_to_match",
    "solve",
    "strategy_budgets",
    "validate_budgets",
    "validate_portfolio",
    "worst_case_profit",
    "write_results",
]
