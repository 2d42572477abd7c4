"""Aggregation gap and minimal storage-fleet search."""

from __future__ import annotations

import numpy as np
import pytest

from rvpp import (
    BudgetSet,
    DrsUnit,
    FdUnit,
    Portfolio,
    SizingError,
    ZERO_BUDGETS,
    aggregation_gap,
    individual_profit,
    price_only_budgets,
    size_es_to_match,
)
from toys import battery, market, wind


def spiky_market(T: int = 6):
    return market(T, dam=[10, 30, 20, 40, 15, 25], dam_down=4.0, sr_up=2.0, sr_up_dev=0.5)


def test_singleton_portfolio_has_zero_gap():
    portfolio = Portfolio(ndrs=(wind(6, upper=12.0, dev=3.0),))
    budgets = BudgetSet(gamma_dam=2, gamma_sr_up=1, gamma_per_unit={"wf": 2})
    report = aggregation_gap(portfolio, spiky_market(), budgets)
    assert report.gap == pytest.approx(0.0, abs=1e-8)
    rvpp_profit, sum_individual, gap = report
    assert (rvpp_profit, sum_individual, gap) == (report.rvpp_profit, report.sum_individual, report.gap)
    assert dict(report.per_unit).keys() == {"wf"}


def test_uncoupled_generators_add_up_exactly():
    portfolio = Portfolio(ndrs=(wind(6, upper=12.0, name="w1"), wind(6, upper=7.0, name="w2")))
    report = aggregation_gap(portfolio, spiky_market(), ZERO_BUDGETS)
    assert report.gap == pytest.approx(0.0, abs=1e-8)


def test_flexible_demand_alone_pays_for_energy():
    load = FdUnit("ld", profiles=((3.0,) * 6,), deviation=(0.2,) * 6)
    assert individual_profit(load, spiky_market(), ZERO_BUDGETS) < 0.0


def test_individual_profit_arithmetic():
    # 24 periods x 40 MW x 10 EUR/MWh.
    assert individual_profit(wind(24, upper=40.0), market(24), ZERO_BUDGETS) == pytest.approx(9600.0)


def test_gap_is_never_negative_randomized():
    rng = np.random.default_rng(2207)
    T = 6
    for trial in range(5):
        prices = rng.uniform(5.0, 45.0, size=T).round(2)
        hydro = DrsUnit("h1", 8.0, 2.0, 10.0, 5.0, 3.0, min_up=2)
        load = FdUnit("ld", profiles=((3.0,) * T, (2.5,) * T), deviation=(0.3,) * T)
        portfolio = Portfolio(drs=(hydro,), ndrs=(wind(T, upper=9.0, dev=2.0),), fd=(load,))
        scenario = market(
            T, dam=prices, dam_down=3.0, dam_up=2.0, sr_up=2.0, sr_up_dev=0.6, sr_dn=1.5, sr_dn_dev=0.5
        )
        budgets = BudgetSet(
            gamma_dam=int(rng.integers(0, T + 1)),
            gamma_sr_up=int(rng.integers(0, T + 1)),
            gamma_sr_down=int(rng.integers(0, T + 1)),
            gamma_per_unit={"wf": int(rng.integers(0, T + 1)), "ld": int(rng.integers(0, 3))},
        )
        report = aggregation_gap(portfolio, scenario, budgets)
        assert report.gap >= -1e-6, f"trial {trial}: {tuple(report)}"


def double_cycle_market():
    return market(4, dam=[0.0, 70.0, 0.0, 70.0])


def test_sizing_finds_the_two_module_fleet():
    # One module earns at most 2 * 31.5875 = 63.175 over the two cycles, so
    # a 70 EUR target needs exactly two modules.
    result = size_es_to_match(70.0, battery(), double_cycle_market(), ZERO_BUDGETS)
    assert result.module_count == 2
    assert result.fleet_e_max == pytest.approx(2.0)
    assert result.es_objective == pytest.approx(2 * 63.175, abs=1e-6)
    assert result.minimality_checked
    assert result.lower_bound_profit == 70.0
    assert result.fleet(battery()).module_count == 2


def test_zero_gap_needs_a_single_module():
    result = size_es_to_match(0.0, battery(), double_cycle_market(), ZERO_BUDGETS)
    assert result.module_count == 1
    assert result.es_objective == pytest.approx(63.175, abs=1e-6)


def test_accelerated_and_linear_walks_agree():
    for target in (10.0, 70.0, 200.0, 63.175 * 5 - 1e-6):
        fast = size_es_to_match(target, battery(), double_cycle_market(), ZERO_BUDGETS)
        slow = size_es_to_match(
            target, battery(), double_cycle_market(), ZERO_BUDGETS, accelerate=False
        )
        assert fast.module_count == slow.module_count
        assert slow.iterations == slow.module_count
        assert fast.es_objective == pytest.approx(slow.es_objective, rel=1e-9)


def test_module_count_grows_with_price_budget():
    s = market(4, dam=[0.0, 70.0, 0.0, 70.0], dam_down=[0.0, 20.0, 0.0, 20.0])
    counts = []
    for gamma in (0, 1, 2):
        res = size_es_to_match(60.0, battery(), s, BudgetSet(gamma_dam=gamma))
        counts.append(res.module_count)
    assert counts == sorted(counts)
    assert counts[-1] > counts[0]


def test_sizing_cap_exhausted_raises():
    with pytest.raises(SizingError, match="up to 3 modules"):
        size_es_to_match(1.0e9, battery(), double_cycle_market(), ZERO_BUDGETS, max_modules=3)
    with pytest.raises(ValueError, match="max_modules"):
        size_es_to_match(1.0, battery(), double_cycle_market(), ZERO_BUDGETS, max_modules=0)


def test_price_only_budgets_drop_unit_entries():
    b = BudgetSet(2, 1, 1, {"wf": 3})
    stripped = price_only_budgets(b)
    assert stripped.gamma_per_unit == ()
    assert (stripped.gamma_dam, stripped.gamma_sr_up, stripped.gamma_sr_down) == (2, 1, 1)


def test_gap_accepts_budgets_naming_only_portfolio_units():
    # Budgets may carry entries for units that a caller already removed from
    # the portfolio; the gap computation filters instead of failing.
    portfolio = Portfolio(ndrs=(wind(6, upper=12.0),))
    budgets = BudgetSet(gamma_dam=1, gamma_per_unit={"wf": 1, "ld": 2})
    report = aggregation_gap(portfolio, spiky_market(), budgets)
    assert report.gap == pytest.approx(0.0, abs=1e-8)
