"""Schedule-side checks that never touch a solver.

worst_case_profit re-prices a fixed schedule under the most damaging budget
realization (per stream, the Gamma periods with the largest loss, ties to the
earliest period).  audit_robust_feasibility replays quantity realizations
against a robust schedule.  replay_schedule recomputes every deterministic
constraint family from raw arrays.  All three work purely on decoded
schedules, so they form an independent cross-check of the MILP layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .domain import BudgetSet, MarketScenario, Portfolio
from .scheduler import RvppSchedule, dominant_subset
from .storage import EsFleet, EsSchedule

AUDIT_TOL = 1.0e-6
DEFAULT_EXHAUSTIVE_CAP = 20000


@dataclass
class Realization:
    """One concrete uncertainty outcome: per-stream degraded-period subsets
    plus the induced parameter vectors."""

    dam_subset: tuple[int, ...]
    sr_up_subset: tuple[int, ...]
    sr_dn_subset: tuple[int, ...]
    unit_subsets: dict[str, tuple[int, ...]]
    dam_price: np.ndarray
    sr_up_price: np.ndarray
    sr_dn_price: np.ndarray
    unit_deviation: dict[str, np.ndarray]
    dam_loss: float
    sr_up_loss: float
    sr_dn_loss: float

    def price_loss_total(self) -> float:
        return self.dam_loss + self.sr_up_loss + self.sr_dn_loss


def budget_subsets(period_count: int, gamma: int):
    """All cardinality-gamma period subsets, lexicographic."""
    return combinations(range(period_count), gamma)


def _price_losses(schedule, scenario: MarketScenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dt = scenario.grid.delta_t
    dn = np.asarray(scenario.dam_price_down_dev)
    up = np.asarray(scenario.dam_price_up_dev)
    if isinstance(schedule, RvppSchedule):
        traded = schedule.p_da * dt
        dam = dn * np.maximum(traded, 0.0) + up * np.maximum(-traded, 0.0)
    elif isinstance(schedule, EsSchedule):
        # Storage loses on both gross flows: sold energy at a lower price,
        # bought energy at a higher one.
        dam = dn * schedule.discharge * dt + up * schedule.charge * dt
    else:
        raise TypeError(f"unsupported schedule type {type(schedule).__name__}")
    sr_up = np.asarray(scenario.sr_up_price_dev) * schedule.r_up
    sr_dn = np.asarray(scenario.sr_dn_price_dev) * schedule.r_dn
    return dam, sr_up, sr_dn


def worst_case_profit(schedule, scenario: MarketScenario, budgets: BudgetSet) -> tuple[float, Realization]:
    """Profit of the fixed schedule under its most damaging realization.

    Per price stream the loss is separable across periods, so the worst
    cardinality-Gamma subset is exactly the Gamma largest per-period losses
    (ties broken toward the earlier period).  Quantity streams do not change
    the revenue of a fixed schedule; they are audited separately.
    """
    dam_vec, up_vec, dn_vec = _price_losses(schedule, scenario)
    dam_pick = dominant_subset(dam_vec, budgets.gamma_dam)
    up_pick = dominant_subset(up_vec, budgets.gamma_sr_up)
    dn_pick = dominant_subset(dn_vec, budgets.gamma_sr_down)
    dam_loss = float(dam_vec[list(dam_pick)].sum()) if dam_pick else 0.0
    up_loss = float(up_vec[list(up_pick)].sum()) if up_pick else 0.0
    dn_loss = float(dn_vec[list(dn_pick)].sum()) if dn_pick else 0.0

    T = scenario.grid.period_count
    dam_price = np.asarray(scenario.dam_price, dtype=float).copy()
    for t in dam_pick:
        if isinstance(schedule, RvppSchedule):
            if schedule.p_da[t] >= 0.0:
                dam_price[t] -= scenario.dam_price_down_dev[t]
            else:
                dam_price[t] += scenario.dam_price_up_dev[t]
        else:
            # Gross exposure: the induced price is reported for the selling side.
            dam_price[t] -= scenario.dam_price_down_dev[t]
    sr_up_price = np.asarray(scenario.sr_up_price, dtype=float).copy()
    for t in up_pick:
        sr_up_price[t] -= scenario.sr_up_price_dev[t]
    sr_dn_price = np.asarray(scenario.sr_dn_price, dtype=float).copy()
    for t in dn_pick:
        sr_dn_price[t] -= scenario.sr_dn_price_dev[t]

    unit_subsets: dict[str, tuple[int, ...]] = {}
    unit_deviation: dict[str, np.ndarray] = {}
    realization = Realization(
        dam_subset=dam_pick,
        sr_up_subset=up_pick,
        sr_dn_subset=dn_pick,
        unit_subsets=unit_subsets,
        dam_price=dam_price,
        sr_up_price=sr_up_price,
        sr_dn_price=sr_dn_price,
        unit_deviation=unit_deviation,
        dam_loss=dam_loss,
        sr_up_loss=up_loss,
        sr_dn_loss=dn_loss,
    )
    return schedule.nominal_profit - realization.price_loss_total(), realization


def _stream_rows(schedule: RvppSchedule, portfolio: Portfolio):
    """Per uncertain stream: (name, deviation, slack available before violation).

    slack[t] is how much of the deviation the schedule can absorb at t; a
    realization degrading period t breaks the stream iff deviation[t] exceeds
    slack[t].
    """
    rows = []
    for u in portfolio.ndrs:
        slack = np.asarray(u.forecast_upper) - schedule.dispatch[u.name] - schedule.reserve_up[u.name]
        rows.append((u.name, np.asarray(u.forecast_deviation), slack, "dispatch plus upward reserve"))
    for u in portfolio.csp:
        slack = np.asarray(u.sf_upper) - schedule.sf_power[u.name]
        rows.append((u.name, np.asarray(u.sf_deviation), slack, "solar-field draw"))
    for u in portfolio.fd:
        profile = np.asarray(u.profiles[schedule.fd_profile[u.name]])
        slack = schedule.dispatch[u.name] - profile
        rows.append((u.name, np.asarray(u.deviation), slack, "consumption margin over the chosen profile"))
    return rows


def _balance_violations(schedule: RvppSchedule, portfolio: Portfolio) -> list[str]:
    gen = [u.name for u in portfolio.drs] + [u.name for u in portfolio.ndrs] + [u.name for u in portfolio.csp]
    fd = [u.name for u in portfolio.fd]
    out: list[str] = []
    T = schedule.grid_periods
    zeros = np.zeros(T)
    total = sum((schedule.dispatch[n] for n in gen), zeros.copy()) - sum(
        (schedule.dispatch[n] for n in fd), zeros.copy()
    )
    total_up = total + sum((schedule.reserve_up[n] for n in gen), zeros.copy()) + sum(
        (schedule.reserve_up[n] for n in fd), zeros.copy()
    )
    total_dn = total - sum((schedule.reserve_dn[n] for n in gen), zeros.copy()) - sum(
        (schedule.reserve_dn[n] for n in fd), zeros.copy()
    )
    for label, lhs, rhs in (
        ("energy balance", total, schedule.p_da),
        ("upward-activation balance", total_up, schedule.p_da + schedule.r_up),
        ("downward-activation balance", total_dn, schedule.p_da - schedule.r_dn),
    ):
        gap = np.abs(lhs - rhs)
        worst = int(gap.argmax())
        if gap[worst] > AUDIT_TOL:
            out.append(f"{label} off by {gap[worst]:.3e} at period {worst + 1}")
    return out


def audit_robust_feasibility(
    schedule: RvppSchedule,
    portfolio: Portfolio,
    scenario: MarketScenario,
    budgets: BudgetSet,
    exhaustive_cap: int = DEFAULT_EXHAUSTIVE_CAP,
) -> list[str]:
    """Replay quantity realizations against a fixed portfolio schedule.

    Streams whose subset count C(T, Gamma) stays within exhaustive_cap are
    checked against every cardinality-Gamma subset; larger streams are checked
    against the dominant realization (the Gamma largest deviations, ties to
    the earliest period).  The market balance is re-verified as well.  Returns
    human-readable violations; an empty list is a pass.

    Exhaustive mode demands feasibility under every subset, which for
    0 < Gamma < T is stronger than what the budget model promises (it
    absorbs the dominant subset only); optimal schedules are expected to
    pass exhaustive audits when Gamma is 0 or T, and dominant audits at any
    budget.  Pass exhaustive_cap=0 to force dominant mode.
    """
    if not isinstance(schedule, RvppSchedule):
        raise TypeError("audit expects a portfolio schedule")
    out = _balance_violations(schedule, portfolio)
    T = schedule.grid_periods
    for name, deviation, slack, what in _stream_rows(schedule, portfolio):
        gamma = budgets.unit_budget(name)
        if gamma == 0:
            continue
        breakable = deviation > slack + AUDIT_TOL
        if not breakable.any():
            continue
        n_subsets = math.comb(T, gamma)
        if n_subsets <= exhaustive_cap:
            hits = np.zeros(T, dtype=int)
            for subset in budget_subsets(T, gamma):
                for t in subset:
                    if breakable[t]:
                        hits[t] += 1
            for t in range(T):
                if hits[t]:
                    out.append(
                        f"{name}: {what} exceeds the degraded limit by "
                        f"{deviation[t] - slack[t]:.6g} at period {t + 1} "
                        f"(hit in {hits[t]} of {n_subsets} audited subsets)"
                    )
        else:
            subset = dominant_subset(deviation, gamma)
            for t in subset:
                if breakable[t]:
                    out.append(
                        f"{name}: {what} exceeds the degraded limit by "
                        f"{deviation[t] - slack[t]:.6g} at period {t + 1} "
                        f"(dominant realization)"
                    )
    return out


def _max_residual(values: np.ndarray) -> float:
    return float(np.maximum(values, 0.0).max()) if values.size else 0.0


def replay_rvpp_schedule(
    schedule: RvppSchedule,
    portfolio: Portfolio,
    scenario: MarketScenario,
    *,
    literal_3c: bool = False,
) -> dict[str, float]:
    """Max violation per deterministic constraint family, from raw arrays."""
    T = schedule.grid_periods
    dt = schedule.delta_t
    res: dict[str, float] = {}

    gen = [u.name for u in portfolio.drs] + [u.name for u in portfolio.ndrs] + [u.name for u in portfolio.csp]
    fd = [u.name for u in portfolio.fd]
    zeros = np.zeros(T)
    total = sum((schedule.dispatch[n] for n in gen), zeros.copy()) - sum(
        (schedule.dispatch[n] for n in fd), zeros.copy()
    )
    total_up = total + sum((schedule.reserve_up[n] for n in gen), zeros.copy()) + sum(
        (schedule.reserve_up[n] for n in fd), zeros.copy()
    )
    total_dn = total - sum((schedule.reserve_dn[n] for n in gen), zeros.copy()) - sum(
        (schedule.reserve_dn[n] for n in fd), zeros.copy()
    )
    res["balance_id"] = float(np.abs(total - schedule.p_da).max())
    res["balance_up"] = float(np.abs(total_up - schedule.p_da - schedule.r_up).max())
    res["balance_dn"] = float(np.abs(total_dn - schedule.p_da + schedule.r_dn).max())

    nonneg = [schedule.r_up, schedule.r_dn]
    for name in schedule.reserve_up:
        nonneg += [schedule.reserve_up[name], schedule.reserve_dn[name]]
    res["nonnegativity"] = max(_max_residual(-v) for v in nonneg)

    commit_res = [0.0]
    minup_res = [0.0]
    mindown_res = [0.0]
    for u in tuple(portfolio.drs) + tuple(portfolio.csp):
        on = schedule.on[u.name].astype(float)
        su = schedule.start[u.name].astype(float)
        sd = schedule.stop[u.name].astype(float)
        prev = np.concatenate(([1.0 if u.initially_on else 0.0], on[:-1]))
        commit_res.append(float(np.abs(on - prev - su + sd).max()))
        commit_res.append(_max_residual(su + sd - 1.0))
        if u.min_up >= 2:
            for t in range(T):
                window = su[max(0, t - u.min_up + 1) : t + 1].sum()
                minup_res.append(max(0.0, window - on[t]))
        if u.min_down >= 2:
            for t in range(T):
                window = sd[max(0, t - u.min_down + 1) : t + 1].sum()
                mindown_res.append(max(0.0, window - (1.0 - on[t])))
    res["commitment_logic"] = max(commit_res)
    res["min_up"] = max(minup_res)
    res["min_down"] = max(mindown_res)

    drs_env = [0.0]
    drs_energy = [0.0]
    for u in portfolio.drs:
        on = schedule.on[u.name].astype(float)
        p = schedule.dispatch[u.name]
        drs_env.append(_max_residual(p + schedule.reserve_up[u.name] - u.p_max * on))
        drs_env.append(_max_residual(u.p_min * on - (p - schedule.reserve_dn[u.name])))
        if u.daily_energy_limit is not None:
            scale = 1.0 if literal_3c else dt
            used = float((p * dt + schedule.reserve_up[u.name] * scale).sum())
            drs_energy.append(max(0.0, used - u.daily_energy_limit))
    res["drs_envelope"] = max(drs_env)
    res["drs_daily_energy"] = max(drs_energy)

    ndrs_res = [0.0]
    for u in portfolio.ndrs:
        p = schedule.dispatch[u.name]
        ndrs_res.append(
            _max_residual(p + schedule.reserve_up[u.name] - np.asarray(u.forecast_upper))
        )
        ndrs_res.append(_max_residual(u.p_min - (p - schedule.reserve_dn[u.name])))
    res["ndrs_envelope"] = max(ndrs_res)

    csp_bal = [0.0]
    csp_env = [0.0]
    ts_rec = [0.0]
    ts_bounds = [0.0]
    for u in portfolio.csp:
        st = u.store
        p = schedule.dispatch[u.name]
        sf = schedule.sf_power[u.name]
        ch = schedule.ts_charge[u.name]
        dis = schedule.ts_discharge[u.name]
        soc = schedule.ts_soc[u.name]
        on = schedule.on[u.name].astype(float)
        su = schedule.start[u.name].astype(float)
        lhs = p / u.turbine_eff - sf - dis + ch + u.startup_loss * u.turbine_p_max * su
        csp_bal.append(float(np.abs(lhs).max()))
        csp_env.append(_max_residual(p + schedule.reserve_up[u.name] - u.turbine_p_max * on))
        csp_env.append(_max_residual(u.turbine_p_min * on - (p - schedule.reserve_dn[u.name])))
        csp_env.append(_max_residual(sf - np.asarray(u.sf_upper)))
        expected = soc[:-1] + st.charge_eff * dt * ch - dis * dt / st.discharge_eff
        ts_rec.append(float(np.abs(expected - soc[1:]).max()))
        ts_rec.append(abs(soc[0] - soc[-1]))
        ts_bounds.append(_max_residual(st.e_min - soc))
        ts_bounds.append(_max_residual(soc - st.e_max))
        ts_bounds.append(_max_residual(ch - st.charge_p_max))
        ts_bounds.append(_max_residual(dis - st.discharge_p_max))
    res["csp_thermal_balance"] = max(csp_bal)
    res["csp_envelope"] = max(csp_env)
    res["ts_recursion"] = max(ts_rec)
    res["ts_bounds"] = max(ts_bounds)

    fd_res = [0.0]
    for u in portfolio.fd:
        p = schedule.dispatch[u.name]
        profile = np.asarray(u.profiles[schedule.fd_profile[u.name]])
        fd_res.append(_max_residual(profile - p))
        fd_res.append(_max_residual(u.p_min - (p - schedule.reserve_up[u.name])))
        fd_res.append(_max_residual(p + schedule.reserve_dn[u.name] - u.p_max))
    res["fd_envelope"] = max(fd_res)
    return res


def replay_es_schedule(
    schedule: EsSchedule,
    fleet: EsFleet,
    scenario: MarketScenario,
    *,
    symmetric_sigma_margins: bool = True,
) -> dict[str, float]:
    """Max violation per fleet constraint family, from raw arrays."""
    dt = schedule.delta_t
    span = fleet.e_max - fleet.e_min
    mode = schedule.mode.astype(float)
    res: dict[str, float] = {}

    res["mode_exclusivity"] = float(np.minimum(schedule.charge, schedule.discharge).max())
    res["charge_envelope"] = max(
        _max_residual(fleet.charge_p_min * mode - (schedule.charge - schedule.r_up_charge)),
        _max_residual(schedule.charge + schedule.r_dn_charge - fleet.charge_p_max * mode),
    )
    res["discharge_envelope"] = max(
        _max_residual(schedule.discharge + schedule.r_up_discharge - fleet.discharge_p_max * (1.0 - mode)),
        _max_residual(fleet.discharge_p_min * (1.0 - mode) - (schedule.discharge - schedule.r_dn_discharge)),
    )
    res["net_identity"] = float(np.abs(schedule.net - (schedule.discharge - schedule.charge)).max())
    res["reserve_split"] = max(
        float(np.abs(schedule.r_up - schedule.r_up_charge - schedule.r_up_discharge).max()),
        float(np.abs(schedule.r_dn - schedule.r_dn_charge - schedule.r_dn_discharge).max()),
    )
    expected = schedule.soc[:-1] + fleet.charge_eff * dt * schedule.charge - schedule.discharge * dt / fleet.discharge_eff
    res["soc_recursion"] = max(float(np.abs(expected - schedule.soc[1:]).max()), abs(schedule.soc[0] - schedule.soc[-1]))
    res["soc_bounds"] = max(
        _max_residual(fleet.e_min - schedule.soc), _max_residual(schedule.soc - fleet.e_max)
    )
    res["reserve_energy_up"] = max(0.0, float((schedule.r_up * dt / fleet.discharge_eff).sum()) - schedule.sigma_up * span)
    res["reserve_energy_dn"] = max(0.0, float((schedule.r_dn * fleet.charge_eff * dt).sum()) - schedule.sigma_dn * span)
    floor_sigma = schedule.sigma_dn if symmetric_sigma_margins else schedule.sigma_up
    levels = schedule.soc[1:]
    res["soc_margins"] = max(
        _max_residual(fleet.e_min + floor_sigma * span - levels),
        _max_residual(levels - (fleet.e_max - schedule.sigma_dn * span)),
    )
    res["sigma_range"] = max(
        0.0, -schedule.sigma_up, -schedule.sigma_dn, schedule.sigma_up - 1.0, schedule.sigma_dn - 1.0
    )
    return res


def replay_schedule(schedule, portfolio_or_fleet, scenario: MarketScenario, **switches) -> dict[str, float]:
    """Dispatch to the portfolio or fleet replay by schedule type."""
    if isinstance(schedule, RvppSchedule):
        return replay_rvpp_schedule(schedule, portfolio_or_fleet, scenario, **switches)
    if isinstance(schedule, EsSchedule):
        return replay_es_schedule(schedule, portfolio_or_fleet, scenario, **switches)
    raise TypeError(f"unsupported schedule type {type(schedule).__name__}")
