"""Aggregation-gap measurement and storage-equivalence sizing.

The gap is the robust profit of the aggregated portfolio minus the sum of the
units' stand-alone robust profits.  Sizing answers: how many identical
storage modules does a price-robust fleet need before its day profit covers
that gap?  The search adds a profit-floor row to the fleet model and walks
module_count up from 1; a galloping/bisection accelerator is used when fleet
feasibility is provably monotone in the count (no minimum-power constraints),
and both endpoints (N feasible, N-1 infeasible) are always verified.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .backends import backend_factory
from .domain import (
    BudgetSet,
    CspUnit,
    DrsUnit,
    EsUnit,
    FdUnit,
    MarketScenario,
    NdrsUnit,
    Portfolio,
)
from .milp import SENSE_GE, LinearExpression, solve
from .scheduler import build_robust_rvpp, extract_rvpp_schedule
from .storage import EsFleet, build_robust_es, extract_es_schedule


class SizingError(RuntimeError):
    """Raised when no fleet within the module cap can cover the gap."""


@dataclass(frozen=True)
class GapReport:
    """Unpacks as (rvpp_profit, sum_individual, gap)."""

    rvpp_profit: float
    sum_individual: float
    per_unit: tuple[tuple[str, float], ...]

    @property
    def gap(self) -> float:
        return self.rvpp_profit - self.sum_individual

    def __iter__(self):
        return iter((self.rvpp_profit, self.sum_individual, self.gap))


@dataclass(frozen=True)
class SizingResult:
    """Minimal fleet whose robust profit covers the lower-bound target.

    iterations counts distinct fleet solves; with the linear walk from 1 it
    equals module_count.  minimality_checked records that module_count - 1
    was solved and found infeasible (trivially true at 1).  per_unit and
    rvpp_profit are filled when the target came from an aggregation-gap
    report rather than a bare number.
    """

    lower_bound_profit: float
    module_count: int
    fleet_e_max: float
    es_objective: float
    iterations: int
    minimality_checked: bool
    per_unit: tuple[tuple[str, float], ...] = ()
    rvpp_profit: float | None = None

    def fleet(self, module: EsUnit) -> EsFleet:
        return EsFleet(module, self.module_count)


def _singleton(unit) -> Portfolio:
    if isinstance(unit, DrsUnit):
        return Portfolio(drs=(unit,))
    if isinstance(unit, NdrsUnit):
        return Portfolio(ndrs=(unit,))
    if isinstance(unit, CspUnit):
        return Portfolio(csp=(unit,))
    if isinstance(unit, FdUnit):
        return Portfolio(fd=(unit,))
    raise TypeError(f"not a portfolio unit: {type(unit).__name__}")


def _budgets_for(budgets: BudgetSet, names: set[str]) -> BudgetSet:
    kept = tuple((n, g) for n, g in budgets.gamma_per_unit if n in names)
    return replace(budgets, gamma_per_unit=kept)


def price_only_budgets(budgets: BudgetSet) -> BudgetSet:
    return replace(budgets, gamma_per_unit=())


def individual_profit(
    unit,
    scenario: MarketScenario,
    budgets: BudgetSet,
    backend: str | None = None,
    **build_kwargs,
) -> float:
    """Stand-alone robust profit of one unit facing the same markets.

    The unit keeps its own quantity budget and the full price budgets; other
    units' budgets are dropped along with the units themselves.
    """
    portfolio = _singleton(unit)
    b = _budgets_for(budgets, {unit.name})
    m = build_robust_rvpp(portfolio, scenario, b, **build_kwargs)
    sol = solve(m, backend_factory(backend)())
    if sol.status != "optimal":
        raise SizingError(f"stand-alone solve for {unit.name!r} ended {sol.status}")
    return extract_rvpp_schedule(m, sol, portfolio).objective_value


def aggregation_gap(
    portfolio: Portfolio,
    scenario: MarketScenario,
    budgets: BudgetSet,
    backend: str | None = None,
    **build_kwargs,
) -> GapReport:
    """Aggregated robust profit vs the sum of stand-alone robust profits."""
    budgets = _budgets_for(budgets, set(portfolio.unit_names()))
    m = build_robust_rvpp(portfolio, scenario, budgets, **build_kwargs)
    sol = solve(m, backend_factory(backend)())
    if sol.status != "optimal":
        raise SizingError(f"aggregated solve ended {sol.status}")
    rvpp = extract_rvpp_schedule(m, sol, portfolio).objective_value
    per_unit = []
    for unit in portfolio.all_units():
        per_unit.append((unit.name, individual_profit(unit, scenario, budgets, backend, **build_kwargs)))
    total = sum(v for _, v in per_unit)
    return GapReport(rvpp_profit=rvpp, sum_individual=total, per_unit=tuple(per_unit))


def _fleet_covers(
    count: int,
    module: EsUnit,
    scenario: MarketScenario,
    budgets: BudgetSet,
    gap: float,
    backend: str | None,
    build_kwargs: dict,
) -> tuple[bool, float]:
    """Solve the price-robust fleet with a profit-floor row; returns
    (floor met, unconstrained-equivalent objective)."""
    m = build_robust_es(EsFleet(module, count), scenario, budgets, **build_kwargs)
    m.add_constraint("profit_floor", m.objective, SENSE_GE, gap)
    sol = solve(m, backend_factory(backend)())
    if sol.status == "infeasible":
        return False, float("nan")
    if sol.status != "optimal":
        raise SizingError(f"fleet solve at {count} modules ended {sol.status}")
    return True, extract_es_schedule(m, sol).objective_value


def size_es_to_match(
    gap: float,
    module: EsUnit,
    scenario: MarketScenario,
    budgets: BudgetSet,
    max_modules: int = 2000,
    backend: str | None = None,
    accelerate: bool | None = None,
    **build_kwargs,
) -> SizingResult:
    """Smallest module_count whose robust fleet profit reaches the gap.

    budgets must be effectively price-only; any per-unit entries are dropped
    here because the fleet has no quantity streams.  accelerate=None picks
    galloping search when the module has no minimum-power constraints (the
    only case where feasibility is monotone in the count) and the linear walk
    otherwise.
    """
    if max_modules < 1:
        raise ValueError("max_modules must be at least 1")
    b = price_only_budgets(budgets)
    if accelerate is None:
        accelerate = module.charge_p_min == 0.0 and module.discharge_p_min == 0.0
    iterations = 0
    solved: dict[int, tuple[bool, float]] = {}

    def probe(count: int) -> tuple[bool, float]:
        nonlocal iterations
        if count not in solved:
            iterations += 1
            solved[count] = _fleet_covers(count, module, scenario, b, gap, backend, build_kwargs)
        return solved[count]

    def result(count: int, profit: float) -> SizingResult:
        return SizingResult(
            lower_bound_profit=gap,
            module_count=count,
            fleet_e_max=module.e_max * count,
            es_objective=profit,
            iterations=iterations,
            minimality_checked=True,
        )

    if not accelerate:
        for count in range(1, max_modules + 1):
            ok, profit = probe(count)
            if ok:
                return result(count, profit)
        raise SizingError(
            f"no fleet of up to {max_modules} modules covers the gap {gap:.6g}"
        )

    ok, profit = probe(1)
    if ok:
        return result(1, profit)
    lo = 1  # largest count known infeasible
    hi = 2
    while True:
        hi = min(hi, max_modules)
        ok, profit = probe(hi)
        if ok:
            break
        if hi == max_modules:
            raise SizingError(
                f"no fleet of up to {max_modules} modules covers the gap {gap:.6g}"
            )
        lo = hi
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        ok, _ = probe(mid)
        if ok:
            hi = mid
        else:
            lo = mid
    # lo = hi - 1 is infeasible and hi is feasible: minimality holds.
    return result(hi, solved[hi][1])
