"""Day-ahead + secondary-reserve scheduling MILPs for an aggregated portfolio.

Two builders share one deterministic core.  The robust builder adds the
budget-of-uncertainty counterpart: price streams are protected through their
dual penalty columns (the objective pays Gamma*mu + sum(xi) per stream), and
generation/demand streams are tightened by the worst cardinality-Gamma
deviation subset.  The selection binaries of each generation/demand stream
are pinned by bounds to the Gamma largest deviations (ties to the earliest
period) so the tightening matches the adversary the audit replays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import (
    BudgetSet,
    MarketScenario,
    Portfolio,
    validate_budgets,
    validate_portfolio,
)
from .milp import (
    BINARY,
    MAXIMIZE,
    SENSE_EQ,
    SENSE_GE,
    SENSE_LE,
    LinearExpression,
    Model,
    Solution,
)

# Strictly dominated by any real price difference; removed from reported objectives.
PROFILE_TIE_EPS = 1.0e-9

BINARY_TOL = 1.0e-6
BALANCE_TOL = 1.0e-6


class ModelBuildError(ValueError):
    """Raised when a builder receives inconsistent inputs."""


class DecodeError(RuntimeError):
    """Raised when a solution cannot be decoded into a schedule."""


@dataclass
class RobustArtifacts:
    """Dual prices and adversary selections attached to a robust schedule.

    mu/xi follow the usual budget-dualization roles: per stream, the objective
    penalty Gamma*mu + sum(xi) equals the worst-case revenue loss at the
    optimum.  unit_pick marks each stream's degraded periods (exactly Gamma
    ones) and unit_x the deviation absorbed there.
    """

    budgets: BudgetSet
    mu_dam: float
    xi_dam: np.ndarray
    x_dam: np.ndarray
    mu_sr_up: float
    xi_sr_up: np.ndarray
    mu_sr_dn: float
    xi_sr_dn: np.ndarray
    unit_mu: dict[str, float]
    unit_xi: dict[str, np.ndarray]
    unit_pick: dict[str, np.ndarray]
    unit_x: dict[str, np.ndarray]

    def dam_penalty(self) -> float:
        return self.budgets.gamma_dam * self.mu_dam + float(self.xi_dam.sum())

    def sr_up_penalty(self) -> float:
        return self.budgets.gamma_sr_up * self.mu_sr_up + float(self.xi_sr_up.sum())

    def sr_dn_penalty(self) -> float:
        return self.budgets.gamma_sr_down * self.mu_sr_dn + float(self.xi_sr_dn.sum())

    def price_penalty_total(self) -> float:
        """Objective give-up for price uncertainty; the per-unit duals live in
        constraints only and carry no objective weight."""
        return self.dam_penalty() + self.sr_up_penalty() + self.sr_dn_penalty()


@dataclass
class RvppSchedule:
    """Decoded first-stage decisions.

    dispatch holds electrical output per unit (for flexible demand it holds
    consumption).  on/start/stop cover committed units only.  ts_soc has T+1
    points; index 0 is the start-of-day store level, which equals index T by
    the cyclic coupling.  objective_value is the solver objective with the
    profile tie-break term removed; nominal_profit prices the same schedule
    at nominal prices (identical for deterministic runs).
    """

    grid_periods: int
    delta_t: float
    p_da: np.ndarray
    r_up: np.ndarray
    r_dn: np.ndarray
    dispatch: dict[str, np.ndarray]
    reserve_up: dict[str, np.ndarray]
    reserve_dn: dict[str, np.ndarray]
    on: dict[str, np.ndarray]
    start: dict[str, np.ndarray]
    stop: dict[str, np.ndarray]
    fd_profile: dict[str, int]
    sf_power: dict[str, np.ndarray]
    ts_charge: dict[str, np.ndarray]
    ts_discharge: dict[str, np.ndarray]
    ts_soc: dict[str, np.ndarray]
    objective_value: float
    nominal_profit: float
    artifacts: RobustArtifacts | None = None


def _t2(t: int) -> str:
    return f"{t:02d}"


def dominant_subset(deviation, gamma: int) -> tuple[int, ...]:
    """Indices of the gamma largest deviations, ties broken toward earlier periods."""
    order = sorted(range(len(deviation)), key=lambda t: (-deviation[t], t))
    return tuple(sorted(order[:gamma]))


def _uncertain_streams(portfolio: Portfolio) -> list[tuple[str, tuple[float, ...]]]:
    streams = [(u.name, u.forecast_deviation) for u in portfolio.ndrs]
    streams += [(u.name, u.sf_deviation) for u in portfolio.csp]
    streams += [(u.name, u.deviation) for u in portfolio.fd]
    return streams


def _require_valid(portfolio: Portfolio, scenario: MarketScenario) -> None:
    if portfolio.is_empty():
        raise ModelBuildError("portfolio has no units")
    violations = validate_portfolio(portfolio, scenario)
    if violations:
        raise ModelBuildError("invalid inputs: " + "; ".join(violations[:5]))


def _add_commitment(m: Model, name: str, T: int, min_up: int, min_down: int, initially_on: bool):
    """Three-binary commitment logic with start/stop exclusivity and min windows.

    A unit that starts the day on is assumed to have met its minimum up time
    already (no residual obligation is carried in).
    """
    on = [m.add_variable(f"on__{name}_t{_t2(t)}", BINARY) for t in range(T)]
    start = [m.add_variable(f"start__{name}_t{_t2(t)}", BINARY) for t in range(T)]
    stop = [m.add_variable(f"stop__{name}_t{_t2(t)}", BINARY) for t in range(T)]
    prev = 1.0 if initially_on else 0.0
    for t in range(T):
        terms = [(on[t].index, 1.0), (start[t].index, -1.0), (stop[t].index, 1.0)]
        rhs = prev if t == 0 else 0.0
        if t > 0:
            terms.append((on[t - 1].index, -1.0))
        m.add_constraint(f"logic__{name}_t{_t2(t)}", LinearExpression.from_terms(terms), SENSE_EQ, rhs)
        m.add_constraint(
            f"excl__{name}_t{_t2(t)}",
            LinearExpression.from_terms([(start[t].index, 1.0), (stop[t].index, 1.0)]),
            SENSE_LE,
            1.0,
        )
    if min_up >= 2:
        for t in range(T):
            window = range(max(0, t - min_up + 1), t + 1)
            terms = [(start[i].index, 1.0) for i in window] + [(on[t].index, -1.0)]
            m.add_constraint(f"minup__{name}_t{_t2(t)}", LinearExpression.from_terms(terms), SENSE_LE, 0.0)
    if min_down >= 2:
        for t in range(T):
            window = range(max(0, t - min_down + 1), t + 1)
            terms = [(stop[i].index, 1.0) for i in window] + [(on[t].index, 1.0)]
            m.add_constraint(f"mindown__{name}_t{_t2(t)}", LinearExpression.from_terms(terms), SENSE_LE, 1.0)
    return on, start, stop


def _build_core(
    m: Model,
    portfolio: Portfolio,
    scenario: MarketScenario,
    literal_3c: bool,
    cap_extra: dict[str, list[int]] | None = None,
) -> dict:
    """Deterministic portfolio model; returns the handles the robust layer extends.

    cap_extra maps a unit name to per-period variable ids added (coefficient
    +1) to that unit's forecast/demand coupling row; the robust builder uses
    it to thread the absorbed deviations through.
    """
    cap_extra = cap_extra or {}

    def extra(name: str, t: int) -> list[tuple[int, float]]:
        ids = cap_extra.get(name)
        return [(ids[t], 1.0)] if ids else []

    grid = scenario.grid
    T = grid.period_count
    dt = grid.delta_t

    p_da = [m.add_variable(f"pda_t{_t2(t)}", lower=-math.inf, upper=math.inf) for t in range(T)]
    r_up = [m.add_variable(f"rup_t{_t2(t)}") for t in range(T)]
    r_dn = [m.add_variable(f"rdn_t{_t2(t)}") for t in range(T)]

    obj: list[tuple[int, float]] = []
    for t in range(T):
        obj.append((p_da[t].index, scenario.dam_price[t] * dt))
        obj.append((r_up[t].index, scenario.sr_up_price[t]))
        obj.append((r_dn[t].index, scenario.sr_dn_price[t]))

    # Balance accumulators: generation enters positive, demand negative.
    id_terms: list[list[tuple[int, float]]] = [[] for _ in range(T)]
    up_terms: list[list[tuple[int, float]]] = [[] for _ in range(T)]
    dn_terms: list[list[tuple[int, float]]] = [[] for _ in range(T)]
    perturbation: list[tuple[int, float]] = []

    for u in portfolio.drs:
        disp = [m.add_variable(f"disp__{u.name}_t{_t2(t)}", upper=u.p_max) for t in range(T)]
        ru = [m.add_variable(f"rup__{u.name}_t{_t2(t)}", upper=u.p_max) for t in range(T)]
        rd = [m.add_variable(f"rdn__{u.name}_t{_t2(t)}", upper=u.p_max) for t in range(T)]
        on, start, stop = _add_commitment(m, u.name, T, u.min_up, u.min_down, u.initially_on)
        for t in range(T):
            m.add_constraint(
                f"drs_up__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(disp[t].index, 1.0), (ru[t].index, 1.0), (on[t].index, -u.p_max)]
                ),
                SENSE_LE,
                0.0,
            )
            m.add_constraint(
                f"drs_dn__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(disp[t].index, 1.0), (rd[t].index, -1.0), (on[t].index, -u.p_min)]
                ),
                SENSE_GE,
                0.0,
            )
            obj.append((disp[t].index, -u.op_cost * dt))
            obj.append((start[t].index, -u.startup_cost))
            obj.append((stop[t].index, -u.shutdown_cost))
            id_terms[t].append((disp[t].index, 1.0))
            up_terms[t] += [(disp[t].index, 1.0), (ru[t].index, 1.0)]
            dn_terms[t] += [(disp[t].index, 1.0), (rd[t].index, -1.0)]
        if u.daily_energy_limit is not None:
            reserve_scale = 1.0 if literal_3c else dt
            terms = [(disp[t].index, dt) for t in range(T)]
            terms += [(ru[t].index, reserve_scale) for t in range(T)]
            m.add_constraint(
                f"drs_energy__{u.name}",
                LinearExpression.from_terms(terms),
                SENSE_LE,
                u.daily_energy_limit,
            )

    for u in portfolio.ndrs:
        disp = [m.add_variable(f"disp__{u.name}_t{_t2(t)}") for t in range(T)]
        ru = [m.add_variable(f"rup__{u.name}_t{_t2(t)}") for t in range(T)]
        rd = [m.add_variable(f"rdn__{u.name}_t{_t2(t)}") for t in range(T)]
        for t in range(T):
            m.add_constraint(
                f"ndrs_cap__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(disp[t].index, 1.0), (ru[t].index, 1.0)] + extra(u.name, t)
                ),
                SENSE_LE,
                u.forecast_upper[t],
            )
            m.add_constraint(
                f"ndrs_floor__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms([(disp[t].index, 1.0), (rd[t].index, -1.0)]),
                SENSE_GE,
                u.p_min,
            )
            obj.append((disp[t].index, -u.op_cost * dt))
            id_terms[t].append((disp[t].index, 1.0))
            up_terms[t] += [(disp[t].index, 1.0), (ru[t].index, 1.0)]
            dn_terms[t] += [(disp[t].index, 1.0), (rd[t].index, -1.0)]

    for u in portfolio.csp:
        st = u.store
        disp = [m.add_variable(f"disp__{u.name}_t{_t2(t)}", upper=u.turbine_p_max) for t in range(T)]
        ru = [m.add_variable(f"rup__{u.name}_t{_t2(t)}", upper=u.turbine_p_max) for t in range(T)]
        rd = [m.add_variable(f"rdn__{u.name}_t{_t2(t)}", upper=u.turbine_p_max) for t in range(T)]
        sf = [m.add_variable(f"sf__{u.name}_t{_t2(t)}", upper=u.sf_upper[t]) for t in range(T)]
        tsch = [m.add_variable(f"tsch__{u.name}_t{_t2(t)}", upper=st.charge_p_max) for t in range(T)]
        tsdis = [m.add_variable(f"tsdis__{u.name}_t{_t2(t)}", upper=st.discharge_p_max) for t in range(T)]
        tse = [m.add_variable(f"tse__{u.name}_t{_t2(t)}", lower=st.e_min, upper=st.e_max) for t in range(T)]
        on, start, stop = _add_commitment(m, u.name, T, u.min_up, u.min_down, u.initially_on)
        for t in range(T):
            m.add_constraint(
                f"sf_cap__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms([(sf[t].index, 1.0)] + extra(u.name, t)),
                SENSE_LE,
                u.sf_upper[t],
            )
            m.add_constraint(
                f"csp_bal__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms(
                    [
                        (disp[t].index, 1.0 / u.turbine_eff),
                        (sf[t].index, -1.0),
                        (tsdis[t].index, -1.0),
                        (tsch[t].index, 1.0),
                        (start[t].index, u.startup_loss * u.turbine_p_max),
                    ]
                ),
                SENSE_EQ,
                0.0,
            )
            m.add_constraint(
                f"csp_up__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(disp[t].index, 1.0), (ru[t].index, 1.0), (on[t].index, -u.turbine_p_max)]
                ),
                SENSE_LE,
                0.0,
            )
            m.add_constraint(
                f"csp_dn__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(disp[t].index, 1.0), (rd[t].index, -1.0), (on[t].index, -u.turbine_p_min)]
                ),
                SENSE_GE,
                0.0,
            )
            prev = tse[t - 1].index if t > 0 else tse[T - 1].index
            m.add_constraint(
                f"ts_rec__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms(
                    [
                        (tse[t].index, 1.0),
                        (prev, -1.0),
                        (tsch[t].index, -st.charge_eff * dt),
                        (tsdis[t].index, dt / st.discharge_eff),
                    ]
                ),
                SENSE_EQ,
                0.0,
            )
            obj.append((disp[t].index, -u.op_cost * dt))
            id_terms[t].append((disp[t].index, 1.0))
            up_terms[t] += [(disp[t].index, 1.0), (ru[t].index, 1.0)]
            dn_terms[t] += [(disp[t].index, 1.0), (rd[t].index, -1.0)]

    for u in portfolio.fd:
        disp = [m.add_variable(f"disp__{u.name}_t{_t2(t)}", upper=u.p_max) for t in range(T)]
        ru = [m.add_variable(f"rup__{u.name}_t{_t2(t)}", upper=u.p_max) for t in range(T)]
        rd = [m.add_variable(f"rdn__{u.name}_t{_t2(t)}", upper=u.p_max) for t in range(T)]
        picks = [m.add_variable(f"prof__{u.name}_m{j}", BINARY) for j in range(len(u.profiles))]
        m.add_constraint(
            f"fd_pick__{u.name}",
            LinearExpression.from_terms([(w.index, 1.0) for w in picks]),
            SENSE_EQ,
            1.0,
        )
        for j, w in enumerate(picks):
            perturbation.append((w.index, -PROFILE_TIE_EPS * j))
        for t in range(T):
            terms = [(w.index, u.profiles[j][t]) for j, w in enumerate(picks)]
            terms.append((disp[t].index, -1.0))
            terms += extra(u.name, t)
            m.add_constraint(
                f"fd_floor__{u.name}_t{_t2(t)}", LinearExpression.from_terms(terms), SENSE_LE, 0.0
            )
            m.add_constraint(
                f"fd_res_dn__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms([(disp[t].index, 1.0), (ru[t].index, -1.0)]),
                SENSE_GE,
                u.p_min,
            )
            m.add_constraint(
                f"fd_res_up__{u.name}_t{_t2(t)}",
                LinearExpression.from_terms([(disp[t].index, 1.0), (rd[t].index, 1.0)]),
                SENSE_LE,
                u.p_max,
            )
            # Demand consumes: it enters the balance with opposite signs, and
            # its upward reserve is a consumption cut.
            id_terms[t].append((disp[t].index, -1.0))
            up_terms[t] += [(disp[t].index, -1.0), (ru[t].index, 1.0)]
            dn_terms[t] += [(disp[t].index, -1.0), (rd[t].index, -1.0)]

    for t in range(T):
        m.add_constraint(
            f"bal_id_t{_t2(t)}",
            LinearExpression.from_terms(id_terms[t] + [(p_da[t].index, -1.0)]),
            SENSE_EQ,
            0.0,
        )
        m.add_constraint(
            f"bal_up_t{_t2(t)}",
            LinearExpression.from_terms(up_terms[t] + [(p_da[t].index, -1.0), (r_up[t].index, -1.0)]),
            SENSE_EQ,
            0.0,
        )
        m.add_constraint(
            f"bal_dn_t{_t2(t)}",
            LinearExpression.from_terms(dn_terms[t] + [(p_da[t].index, -1.0), (r_dn[t].index, 1.0)]),
            SENSE_EQ,
            0.0,
        )

    m.set_objective(LinearExpression.from_terms(obj + perturbation), MAXIMIZE)
    return {"p_da": p_da, "r_up": r_up, "r_dn": r_dn}


def build_deterministic_rvpp(
    portfolio: Portfolio,
    scenario: MarketScenario,
    *,
    literal_3c: bool = False,
    big_m: float | None = None,
) -> Model:
    """Deterministic day-ahead + reserve scheduling MILP at nominal prices."""
    _require_valid(portfolio, scenario)
    m = Model(name="rvpp_det", big_m=big_m if big_m is not None else 1.0e5)
    _build_core(m, portfolio, scenario, literal_3c)
    m.tags.update(
        {
            "kind": "rvpp",
            "robust": False,
            "portfolio": portfolio,
            "scenario": scenario,
            "literal_3c": literal_3c,
        }
    )
    return m


def build_robust_rvpp(
    portfolio: Portfolio,
    scenario: MarketScenario,
    budgets: BudgetSet,
    *,
    literal_3c: bool = False,
    big_m: float | None = None,
) -> Model:
    """Single-level robust counterpart under budget uncertainty.

    Price streams (energy, both reserve capacities) contribute objective
    penalties Gamma*mu + sum(xi); the energy stream additionally carries the
    traded-volume bridge columns x.  Each generation/demand stream with a
    positive budget is tightened by its Gamma largest deviations; the
    selection binaries are pinned by bounds, the per-period absorption x is
    capped by the deviation, and the stream keeps its printed dual rows, so
    decoded artifacts always satisfy sum(pick) = Gamma and x = deviation on
    the picked periods.  Streams with a zero budget are left deterministic.
    """
    _require_valid(portfolio, scenario)
    bad = validate_budgets(budgets, scenario.grid, portfolio)
    if bad:
        raise ModelBuildError("invalid budgets: " + "; ".join(bad))
    m = Model(name="rvpp_robust", big_m=big_m if big_m is not None else 1.0e5)
    grid = scenario.grid
    T = grid.period_count
    dt = grid.delta_t
    M = m.big_m

    xdev: dict[str, list] = {}
    for name, deviation in _uncertain_streams(portfolio):
        if budgets.unit_budget(name) > 0:
            xdev[name] = [
                m.add_variable(f"xdev__{name}_t{_t2(t)}", upper=deviation[t]) for t in range(T)
            ]
    handles = _build_core(
        m,
        portfolio,
        scenario,
        literal_3c,
        cap_extra={n: [v.index for v in vs] for n, vs in xdev.items()},
    )
    obj = list(m.objective.terms)

    p_da = handles["p_da"]
    r_up = handles["r_up"]
    r_dn = handles["r_dn"]

    if budgets.gamma_dam > 0:
        mu = m.add_variable("mu_dam")
        x = [m.add_variable(f"xdam_t{_t2(t)}") for t in range(T)]
        xi = [m.add_variable(f"xi_dam_t{_t2(t)}") for t in range(T)]
        obj.append((mu.index, -float(budgets.gamma_dam)))
        for t in range(T):
            obj.append((xi[t].index, -1.0))
            m.add_constraint(
                f"rob_dam_vol_t{_t2(t)}",
                LinearExpression.from_terms([(p_da[t].index, dt), (x[t].index, -1.0)]),
                SENSE_LE,
                0.0,
            )
            m.add_constraint(
                f"rob_dam_sign_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(x[t].index, scenario.dam_price_down_dev[t]), (p_da[t].index, scenario.dam_price_up_dev[t] * dt)]
                ),
                SENSE_GE,
                0.0,
            )
            m.add_constraint(
                f"rob_dam_dual_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(mu.index, 1.0), (xi[t].index, 1.0), (x[t].index, -scenario.dam_price_down_dev[t])]
                ),
                SENSE_GE,
                0.0,
            )
    if budgets.gamma_sr_up > 0:
        mu = m.add_variable("mu_srup")
        xi = [m.add_variable(f"xi_srup_t{_t2(t)}") for t in range(T)]
        obj.append((mu.index, -float(budgets.gamma_sr_up)))
        for t in range(T):
            obj.append((xi[t].index, -1.0))
            m.add_constraint(
                f"rob_srup_dual_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(mu.index, 1.0), (xi[t].index, 1.0), (r_up[t].index, -scenario.sr_up_price_dev[t])]
                ),
                SENSE_GE,
                0.0,
            )
    if budgets.gamma_sr_down > 0:
        mu = m.add_variable("mu_srdn")
        xi = [m.add_variable(f"xi_srdn_t{_t2(t)}") for t in range(T)]
        obj.append((mu.index, -float(budgets.gamma_sr_down)))
        for t in range(T):
            obj.append((xi[t].index, -1.0))
            m.add_constraint(
                f"rob_srdn_dual_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(mu.index, 1.0), (xi[t].index, 1.0), (r_dn[t].index, -scenario.sr_dn_price_dev[t])]
                ),
                SENSE_GE,
                0.0,
            )

    selected_subsets: dict[str, tuple[int, ...]] = {}
    for name, deviation in _uncertain_streams(portfolio):
        gamma = budgets.unit_budget(name)
        if gamma == 0:
            continue
        picked = dominant_subset(deviation, gamma)
        selected_subsets[name] = picked
        picked_set = set(picked)
        mu = m.add_variable(f"mu__{name}")
        picks = []
        for t in range(T):
            pin = 1.0 if t in picked_set else 0.0
            q = m.add_variable(f"pick__{name}_t{_t2(t)}", BINARY, lower=pin, upper=pin)
            xi = m.add_variable(f"xi__{name}_t{_t2(t)}")
            x = xdev[name][t]
            picks.append(q)
            m.add_constraint(
                f"rob_low__{name}_t{_t2(t)}",
                LinearExpression.from_terms(
                    [(mu.index, 1.0), (xi.index, 1.0), (q.index, M), (x.index, -1.0)]
                ),
                SENSE_LE,
                M,
            )
            m.add_constraint(
                f"rob_upx__{name}_t{_t2(t)}",
                LinearExpression.from_terms([(x.index, 1.0), (q.index, -M)]),
                SENSE_LE,
                0.0,
            )
            m.add_constraint(
                f"rob_dev__{name}_t{_t2(t)}",
                LinearExpression.from_terms([(mu.index, 1.0), (xi.index, 1.0)]),
                SENSE_GE,
                deviation[t],
            )
        m.add_constraint(
            f"rob_card__{name}",
            LinearExpression.from_terms([(q.index, 1.0) for q in picks]),
            SENSE_EQ,
            float(gamma),
        )

    m.set_objective(LinearExpression.from_terms(obj), MAXIMIZE)
    m.tags.update(
        {
            "kind": "rvpp",
            "robust": True,
            "portfolio": portfolio,
            "scenario": scenario,
            "budgets": budgets,
            "literal_3c": literal_3c,
            "selected_subsets": selected_subsets,
        }
    )
    return m


def _decode_series(m: Model, sol: Solution, pattern: str, T: int) -> np.ndarray:
    out = np.empty(T)
    for t in range(T):
        name = pattern.format(t=_t2(t))
        if not m.has_variable(name):
            raise DecodeError(f"model has no variable {name!r}")
        var = m.variable(name)
        v = sol.values[var.index]
        if var.lower == 0.0 and v < 0.0:
            v = 0.0
        out[t] = v + 0.0  # normalizes -0.0
    return out


def _decode_binary_series(m: Model, sol: Solution, pattern: str, T: int) -> np.ndarray:
    out = np.empty(T, dtype=int)
    for t in range(T):
        name = pattern.format(t=_t2(t))
        if not m.has_variable(name):
            raise DecodeError(f"model has no variable {name!r}")
        v = sol.values[m.variable(name).index]
        r = round(v)
        if abs(v - r) > BINARY_TOL:
            raise DecodeError(f"binary {name!r} is non-integral: {v}")
        out[t] = int(r)
    return out


def extract_rvpp_schedule(m: Model, sol: Solution, portfolio: Portfolio) -> RvppSchedule:
    """Decode a solved model into arrays, re-verifying balance and integrality.

    Raises DecodeError on non-optimal status, missing variables, fractional
    binaries, a flexible-demand unit without exactly one chosen profile, or
    balance residuals above 1e-6.
    """
    if m.tags.get("kind") != "rvpp":
        raise DecodeError("model was not built by a portfolio scheduling builder")
    if sol.status != "optimal":
        raise DecodeError(f"cannot decode a solution with status {sol.status!r}")
    scenario: MarketScenario = m.tags["scenario"]
    T = scenario.grid.period_count
    dt = scenario.grid.delta_t

    p_da = _decode_series(m, sol, "pda_t{t}", T)
    r_up = _decode_series(m, sol, "rup_t{t}", T)
    r_dn = _decode_series(m, sol, "rdn_t{t}", T)

    dispatch: dict[str, np.ndarray] = {}
    reserve_up: dict[str, np.ndarray] = {}
    reserve_dn: dict[str, np.ndarray] = {}
    on: dict[str, np.ndarray] = {}
    start: dict[str, np.ndarray] = {}
    stop: dict[str, np.ndarray] = {}
    fd_profile: dict[str, int] = {}
    sf_power: dict[str, np.ndarray] = {}
    ts_charge: dict[str, np.ndarray] = {}
    ts_discharge: dict[str, np.ndarray] = {}
    ts_soc: dict[str, np.ndarray] = {}

    for u in portfolio.all_units():
        dispatch[u.name] = _decode_series(m, sol, f"disp__{u.name}_t{{t}}", T)
        reserve_up[u.name] = _decode_series(m, sol, f"rup__{u.name}_t{{t}}", T)
        reserve_dn[u.name] = _decode_series(m, sol, f"rdn__{u.name}_t{{t}}", T)
    for u in tuple(portfolio.drs) + tuple(portfolio.csp):
        on[u.name] = _decode_binary_series(m, sol, f"on__{u.name}_t{{t}}", T)
        start[u.name] = _decode_binary_series(m, sol, f"start__{u.name}_t{{t}}", T)
        stop[u.name] = _decode_binary_series(m, sol, f"stop__{u.name}_t{{t}}", T)
    for u in portfolio.csp:
        sf_power[u.name] = _decode_series(m, sol, f"sf__{u.name}_t{{t}}", T)
        ts_charge[u.name] = _decode_series(m, sol, f"tsch__{u.name}_t{{t}}", T)
        ts_discharge[u.name] = _decode_series(m, sol, f"tsdis__{u.name}_t{{t}}", T)
        levels = _decode_series(m, sol, f"tse__{u.name}_t{{t}}", T)
        ts_soc[u.name] = np.concatenate(([levels[-1]], levels))
    for u in portfolio.fd:
        chosen = [
            j
            for j in range(len(u.profiles))
            if round(sol.values[m.variable(f"prof__{u.name}_m{j}").index]) == 1
        ]
        if len(chosen) != 1:
            raise DecodeError(f"{u.name}: expected exactly one chosen profile, got {chosen}")
        fd_profile[u.name] = chosen[0]

    for t in range(T):
        for fam in ("bal_id", "bal_up", "bal_dn"):
            con = m.constraint(f"{fam}_t{_t2(t)}")
            res = con.residual(sol.values)
            if res > BALANCE_TOL:
                raise DecodeError(f"balance row {con.name} violated by {res}")

    nominal = float(np.dot(scenario.dam_price, p_da) * dt)
    nominal += float(np.dot(scenario.sr_up_price, r_up) + np.dot(scenario.sr_dn_price, r_dn))
    for u in portfolio.drs:
        nominal -= u.op_cost * dt * float(dispatch[u.name].sum())
        nominal -= u.startup_cost * float(start[u.name].sum()) + u.shutdown_cost * float(stop[u.name].sum())
    for u in portfolio.ndrs:
        nominal -= u.op_cost * dt * float(dispatch[u.name].sum())
    for u in portfolio.csp:
        nominal -= u.op_cost * dt * float(dispatch[u.name].sum())

    perturb = 0.0
    for u in portfolio.fd:
        perturb += -PROFILE_TIE_EPS * fd_profile[u.name]
    objective_value = sol.objective_value - perturb

    artifacts = None
    if m.tags.get("robust"):
        budgets: BudgetSet = m.tags["budgets"]
        zeros = np.zeros(T)

        def opt_scalar(name: str) -> float:
            return sol.values[m.variable(name).index] if m.has_variable(name) else 0.0

        def opt_series(pattern: str) -> np.ndarray:
            probe = pattern.format(t=_t2(0))
            return _decode_series(m, sol, pattern, T) if m.has_variable(probe) else zeros.copy()

        unit_mu: dict[str, float] = {}
        unit_xi: dict[str, np.ndarray] = {}
        unit_pick: dict[str, np.ndarray] = {}
        unit_x: dict[str, np.ndarray] = {}
        for name, _ in _uncertain_streams(portfolio):
            if budgets.unit_budget(name) == 0:
                continue
            unit_mu[name] = opt_scalar(f"mu__{name}")
            unit_xi[name] = _decode_series(m, sol, f"xi__{name}_t{{t}}", T)
            unit_pick[name] = _decode_binary_series(m, sol, f"pick__{name}_t{{t}}", T)
            unit_x[name] = _decode_series(m, sol, f"xdev__{name}_t{{t}}", T)
            if int(unit_pick[name].sum()) != budgets.unit_budget(name):
                raise DecodeError(
                    f"{name}: adversary picked {int(unit_pick[name].sum())} periods, "
                    f"budget is {budgets.unit_budget(name)}"
                )
        artifacts = RobustArtifacts(
            budgets=budgets,
            mu_dam=opt_scalar("mu_dam"),
            xi_dam=opt_series("xi_dam_t{t}"),
            x_dam=opt_series("xdam_t{t}"),
            mu_sr_up=opt_scalar("mu_srup"),
            xi_sr_up=opt_series("xi_srup_t{t}"),
            mu_sr_dn=opt_scalar("mu_srdn"),
            xi_sr_dn=opt_series("xi_srdn_t{t}"),
            unit_mu=unit_mu,
            unit_xi=unit_xi,
            unit_pick=unit_pick,
            unit_x=unit_x,
        )

    return RvppSchedule(
        grid_periods=T,
        delta_t=dt,
        p_da=p_da,
        r_up=r_up,
        r_dn=r_dn,
        dispatch=dispatch,
        reserve_up=reserve_up,
        reserve_dn=reserve_dn,
        on=on,
        start=start,
        stop=stop,
        fd_profile=fd_profile,
        sf_power=sf_power,
        ts_charge=ts_charge,
        ts_discharge=ts_discharge,
        ts_soc=ts_soc,
        objective_value=objective_value,
        nominal_profit=nominal,
        artifacts=artifacts,
    )
