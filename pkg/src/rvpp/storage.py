"""Storage-fleet scheduling MILPs for the same two markets.

A fleet is module_count identical modules operated as one unit: power and
energy limits scale with the count, efficiencies and costs do not.  Charging
and discharging are mode-exclusive per period; reserve offers split into a
charge-side part (backing off charging) and a discharge-side part.  Daily
reserve energy is fenced by two envelope fractions (sigma) that also reserve
state-of-charge margins.  The state of charge is cyclic: the recursion wraps
period 1 back onto period T, so the day starts and ends at the same level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import BudgetSet, EsUnit, MarketScenario, validate_budgets
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
from .scheduler import BALANCE_TOL, BINARY_TOL, DecodeError, ModelBuildError, _t2


@dataclass(frozen=True)
class EsFleet:
    """module_count identical storage modules bid as one market unit."""

    module: EsUnit
    module_count: int

    def __post_init__(self):
        if not isinstance(self.module_count, int) or self.module_count < 1:
            raise ValueError(f"module_count must be a positive integer, got {self.module_count!r}")

    # Fleet ratings are always derived from the module so they can never go stale.
    @property
    def charge_p_max(self) -> float:
        return self.module.charge_p_max * self.module_count

    @property
    def charge_p_min(self) -> float:
        return self.module.charge_p_min * self.module_count

    @property
    def discharge_p_max(self) -> float:
        return self.module.discharge_p_max * self.module_count

    @property
    def discharge_p_min(self) -> float:
        return self.module.discharge_p_min * self.module_count

    @property
    def e_max(self) -> float:
        return self.module.e_max * self.module_count

    @property
    def e_min(self) -> float:
        return self.module.e_min * self.module_count

    @property
    def charge_eff(self) -> float:
        return self.module.charge_eff

    @property
    def discharge_eff(self) -> float:
        return self.module.discharge_eff

    @property
    def op_cost(self) -> float:
        return self.module.op_cost


@dataclass
class EsRobustArtifacts:
    budgets: BudgetSet
    mu_dam: float
    xi_dam: np.ndarray
    mu_sr_up: float
    xi_sr_up: np.ndarray
    mu_sr_dn: float
    xi_sr_dn: np.ndarray

    def dam_penalty(self) -> float:
        return self.budgets.gamma_dam * self.mu_dam + float(self.xi_dam.sum())

    def sr_up_penalty(self) -> float:
        return self.budgets.gamma_sr_up * self.mu_sr_up + float(self.xi_sr_up.sum())

    def sr_dn_penalty(self) -> float:
        return self.budgets.gamma_sr_down * self.mu_sr_dn + float(self.xi_sr_dn.sum())

    def price_penalty_total(self) -> float:
        return self.dam_penalty() + self.sr_up_penalty() + self.sr_dn_penalty()


@dataclass
class EsSchedule:
    """Decoded fleet schedule.

    soc has T+1 points; index 0 is the start-of-day level and equals index T
    by the cyclic recursion.  mode is 1 while charging.  objective_value for
    robust runs is nominal_profit minus the price penalties.
    """

    grid_periods: int
    delta_t: float
    charge: np.ndarray
    discharge: np.ndarray
    net: np.ndarray
    r_up_charge: np.ndarray
    r_up_discharge: np.ndarray
    r_dn_charge: np.ndarray
    r_dn_discharge: np.ndarray
    r_up: np.ndarray
    r_dn: np.ndarray
    mode: np.ndarray
    soc: np.ndarray
    sigma_up: float
    sigma_dn: float
    objective_value: float
    nominal_profit: float
    artifacts: EsRobustArtifacts | None = None


def validate_fleet(fleet: EsFleet) -> list[str]:
    out: list[str] = []
    u = fleet.module
    if not 0 <= u.charge_p_min <= u.charge_p_max:
        out.append(f"{u.name}: requires 0 <= charge_p_min <= charge_p_max")
    if not 0 <= u.discharge_p_min <= u.discharge_p_max:
        out.append(f"{u.name}: requires 0 <= discharge_p_min <= discharge_p_max")
    if not 0 <= u.e_min <= u.e_max:
        out.append(f"{u.name}: requires 0 <= e_min <= e_max")
    if not (0 < u.charge_eff <= 1 and 0 < u.discharge_eff <= 1):
        out.append(f"{u.name}: efficiencies must be in (0, 1]")
    if u.op_cost < 0:
        out.append(f"{u.name}: op_cost must be nonnegative")
    return out


def _build_es_core(m: Model, fleet: EsFleet, scenario: MarketScenario, symmetric_sigma_margins: bool) -> None:
    T = scenario.grid.period_count
    dt = scenario.grid.delta_t
    eta_c = fleet.charge_eff
    eta_d = fleet.discharge_eff
    span = fleet.e_max - fleet.e_min

    pch = [m.add_variable(f"pch_t{_t2(t)}", upper=fleet.charge_p_max) for t in range(T)]
    pdis = [m.add_variable(f"pdis_t{_t2(t)}", upper=fleet.discharge_p_max) for t in range(T)]
    net = [m.add_variable(f"net_t{_t2(t)}", lower=-math.inf, upper=math.inf) for t in range(T)]
    ruc = [m.add_variable(f"ruc_t{_t2(t)}") for t in range(T)]
    rud = [m.add_variable(f"rud_t{_t2(t)}") for t in range(T)]
    rdc = [m.add_variable(f"rdc_t{_t2(t)}") for t in range(T)]
    rdd = [m.add_variable(f"rdd_t{_t2(t)}") for t in range(T)]
    rup = [m.add_variable(f"rup_t{_t2(t)}") for t in range(T)]
    rdn = [m.add_variable(f"rdn_t{_t2(t)}") for t in range(T)]
    mode = [m.add_variable(f"mode_t{_t2(t)}", BINARY) for t in range(T)]
    soc = [m.add_variable(f"soc_t{_t2(t)}", lower=fleet.e_min, upper=fleet.e_max) for t in range(T)]
    sigma_up = m.add_variable("sigma_up", upper=1.0)
    sigma_dn = m.add_variable("sigma_dn", upper=1.0)

    obj: list[tuple[int, float]] = []
    for t in range(T):
        obj.append((net[t].index, scenario.dam_price[t] * dt))
        obj.append((rup[t].index, scenario.sr_up_price[t]))
        obj.append((rdn[t].index, scenario.sr_dn_price[t]))
        obj.append((pdis[t].index, -fleet.op_cost))

        m.add_constraint(
            f"es_ch_lo_t{_t2(t)}",
            LinearExpression.from_terms(
                [(pch[t].index, 1.0), (ruc[t].index, -1.0), (mode[t].index, -fleet.charge_p_min)]
            ),
            SENSE_GE,
            0.0,
        )
        m.add_constraint(
            f"es_ch_hi_t{_t2(t)}",
            LinearExpression.from_terms(
                [(pch[t].index, 1.0), (rdc[t].index, 1.0), (mode[t].index, -fleet.charge_p_max)]
            ),
            SENSE_LE,
            0.0,
        )
        m.add_constraint(
            f"es_dis_hi_t{_t2(t)}",
            LinearExpression.from_terms(
                [(pdis[t].index, 1.0), (rud[t].index, 1.0), (mode[t].index, fleet.discharge_p_max)]
            ),
            SENSE_LE,
            fleet.discharge_p_max,
        )
        m.add_constraint(
            f"es_dis_lo_t{_t2(t)}",
            LinearExpression.from_terms(
                [(pdis[t].index, 1.0), (rdd[t].index, -1.0), (mode[t].index, fleet.discharge_p_min)]
            ),
            SENSE_GE,
            fleet.discharge_p_min,
        )
        m.add_constraint(
            f"es_net_t{_t2(t)}",
            LinearExpression.from_terms(
                [(net[t].index, 1.0), (pdis[t].index, -1.0), (pch[t].index, 1.0)]
            ),
            SENSE_EQ,
            0.0,
        )
        m.add_constraint(
            f"es_rup_t{_t2(t)}",
            LinearExpression.from_terms(
                [(rup[t].index, 1.0), (ruc[t].index, -1.0), (rud[t].index, -1.0)]
            ),
            SENSE_EQ,
            0.0,
        )
        m.add_constraint(
            f"es_rdn_t{_t2(t)}",
            LinearExpression.from_terms(
                [(rdn[t].index, 1.0), (rdc[t].index, -1.0), (rdd[t].index, -1.0)]
            ),
            SENSE_EQ,
            0.0,
        )
        prev = soc[t - 1].index if t > 0 else soc[T - 1].index
        m.add_constraint(
            f"es_soc_t{_t2(t)}",
            LinearExpression.from_terms(
                [
                    (soc[t].index, 1.0),
                    (prev, -1.0),
                    (pch[t].index, -eta_c * dt),
                    (pdis[t].index, dt / eta_d),
                ]
            ),
            SENSE_EQ,
            0.0,
        )
        floor_sigma = sigma_dn if symmetric_sigma_margins else sigma_up
        m.add_constraint(
            f"es_floor_t{_t2(t)}",
            LinearExpression.from_terms([(soc[t].index, 1.0), (floor_sigma.index, -span)]),
            SENSE_GE,
            fleet.e_min,
        )
        m.add_constraint(
            f"es_head_t{_t2(t)}",
            LinearExpression.from_terms([(soc[t].index, 1.0), (sigma_dn.index, span)]),
            SENSE_LE,
            fleet.e_max,
        )

    m.add_constraint(
        "es_env_up",
        LinearExpression.from_terms(
            [(rup[t].index, dt / eta_d) for t in range(T)] + [(sigma_up.index, -span)]
        ),
        SENSE_LE,
        0.0,
    )
    m.add_constraint(
        "es_env_dn",
        LinearExpression.from_terms(
            [(rdn[t].index, eta_c * dt) for t in range(T)] + [(sigma_dn.index, -span)]
        ),
        SENSE_LE,
        0.0,
    )
    m.set_objective(LinearExpression.from_terms(obj), MAXIMIZE)


def _require_valid_es(fleet: EsFleet, scenario: MarketScenario) -> None:
    problems = validate_fleet(fleet)
    T = scenario.grid.period_count
    for label in (
        "dam_price",
        "dam_price_down_dev",
        "dam_price_up_dev",
        "sr_up_price",
        "sr_up_price_dev",
        "sr_dn_price",
        "sr_dn_price_dev",
    ):
        if len(getattr(scenario, label)) != T:
            problems.append(f"scenario: {label} has {len(getattr(scenario, label))} entries, grid has {T}")
    if problems:
        raise ModelBuildError("invalid inputs: " + "; ".join(problems[:5]))


def build_deterministic_es(
    fleet: EsFleet,
    scenario: MarketScenario,
    *,
    symmetric_sigma_margins: bool = True,
    big_m: float | None = None,
) -> Model:
    """Deterministic fleet scheduling MILP at nominal prices."""
    _require_valid_es(fleet, scenario)
    m = Model(name="es_det", big_m=big_m if big_m is not None else 1.0e5)
    _build_es_core(m, fleet, scenario, symmetric_sigma_margins)
    m.tags.update(
        {
            "kind": "es",
            "robust": False,
            "fleet": fleet,
            "scenario": scenario,
            "symmetric_sigma_margins": symmetric_sigma_margins,
        }
    )
    return m


def build_robust_es(
    fleet: EsFleet,
    scenario: MarketScenario,
    budgets: BudgetSet,
    *,
    symmetric_sigma_margins: bool = True,
    big_m: float | None = None,
) -> Model:
    """Price-robust counterpart; the fleet has no quantity uncertainty.

    Only the three price streams may carry budgets (the energy stream's loss
    is priced on gross charge and discharge volumes, so buying exposure and
    selling exposure degrade together); a nonzero per-unit budget is an
    input error.
    """
    _require_valid_es(fleet, scenario)
    bad = validate_budgets(budgets, scenario.grid)
    if bad:
        raise ModelBuildError("invalid budgets: " + "; ".join(bad))
    nonzero = [name for name, g in budgets.gamma_per_unit if g != 0]
    if nonzero:
        raise ModelBuildError(
            f"storage accepts price budgets only; per-unit budgets set for {nonzero}"
        )
    m = Model(name="es_robust", big_m=big_m if big_m is not None else 1.0e5)
    _build_es_core(m, fleet, scenario, symmetric_sigma_margins)
    T = scenario.grid.period_count
    dt = scenario.grid.delta_t
    obj = list(m.objective.terms)

    if budgets.gamma_dam > 0:
        mu = m.add_variable("mu_dam")
        xi = [m.add_variable(f"xi_dam_t{_t2(t)}") for t in range(T)]
        obj.append((mu.index, -float(budgets.gamma_dam)))
        for t in range(T):
            obj.append((xi[t].index, -1.0))
            m.add_constraint(
                f"rob_dam_dual_t{_t2(t)}",
                LinearExpression.from_terms(
                    [
                        (mu.index, 1.0),
                        (xi[t].index, 1.0),
                        (m.variable(f"pdis_t{_t2(t)}").index, -scenario.dam_price_down_dev[t] * dt),
                        (m.variable(f"pch_t{_t2(t)}").index, -scenario.dam_price_up_dev[t] * dt),
                    ]
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
                    [
                        (mu.index, 1.0),
                        (xi[t].index, 1.0),
                        (m.variable(f"rup_t{_t2(t)}").index, -scenario.sr_up_price_dev[t]),
                    ]
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
                    [
                        (mu.index, 1.0),
                        (xi[t].index, 1.0),
                        (m.variable(f"rdn_t{_t2(t)}").index, -scenario.sr_dn_price_dev[t]),
                    ]
                ),
                SENSE_GE,
                0.0,
            )

    m.set_objective(LinearExpression.from_terms(obj), MAXIMIZE)
    m.tags.update(
        {
            "kind": "es",
            "robust": True,
            "fleet": fleet,
            "scenario": scenario,
            "budgets": budgets,
            "symmetric_sigma_margins": symmetric_sigma_margins,
        }
    )
    return m


def extract_es_schedule(m: Model, sol: Solution) -> EsSchedule:
    """Decode a solved fleet model, re-verifying mode exclusivity and the
    state-of-charge recursion (both within 1e-6)."""
    if m.tags.get("kind") != "es":
        raise DecodeError("model was not built by a storage builder")
    if sol.status != "optimal":
        raise DecodeError(f"cannot decode a solution with status {sol.status!r}")
    fleet: EsFleet = m.tags["fleet"]
    scenario: MarketScenario = m.tags["scenario"]
    T = scenario.grid.period_count
    dt = scenario.grid.delta_t

    def series(prefix: str) -> np.ndarray:
        out = np.empty(T)
        for t in range(T):
            var = m.variable(f"{prefix}_t{_t2(t)}")
            v = sol.values[var.index]
            if var.lower == 0.0 and v < 0.0:
                v = 0.0
            out[t] = v + 0.0
        return out

    charge = series("pch")
    discharge = series("pdis")
    net = series("net")
    ruc = series("ruc")
    rud = series("rud")
    rdc = series("rdc")
    rdd = series("rdd")
    r_up = series("rup")
    r_dn = series("rdn")
    levels = series("soc")
    mode = np.empty(T, dtype=int)
    for t in range(T):
        v = sol.values[m.variable(f"mode_t{_t2(t)}").index]
        r = round(v)
        if abs(v - r) > BINARY_TOL:
            raise DecodeError(f"mode_t{_t2(t)} is non-integral: {v}")
        mode[t] = int(r)

    for t in range(T):
        if charge[t] > BALANCE_TOL and discharge[t] > BALANCE_TOL:
            raise DecodeError(
                f"period {t + 1} both charges ({charge[t]}) and discharges ({discharge[t]})"
            )

    soc = np.concatenate(([levels[-1]], levels))
    for t in range(T):
        expected = soc[t] + fleet.charge_eff * dt * charge[t] - discharge[t] * dt / fleet.discharge_eff
        if abs(expected - soc[t + 1]) > BALANCE_TOL:
            raise DecodeError(
                f"state-of-charge recursion broken at period {t + 1}: "
                f"{soc[t + 1]} vs expected {expected}"
            )

    nominal = float(np.dot(scenario.dam_price, net) * dt)
    nominal += float(np.dot(scenario.sr_up_price, r_up) + np.dot(scenario.sr_dn_price, r_dn))
    nominal -= fleet.op_cost * float(discharge.sum())

    artifacts = None
    if m.tags.get("robust"):
        budgets: BudgetSet = m.tags["budgets"]
        zeros = np.zeros(T)

        def opt_scalar(name: str) -> float:
            return sol.values[m.variable(name).index] if m.has_variable(name) else 0.0

        def opt_series(prefix: str) -> np.ndarray:
            return series(prefix) if m.has_variable(f"{prefix}_t{_t2(0)}") else zeros.copy()

        artifacts = EsRobustArtifacts(
            budgets=budgets,
            mu_dam=opt_scalar("mu_dam"),
            xi_dam=opt_series("xi_dam"),
            mu_sr_up=opt_scalar("mu_srup"),
            xi_sr_up=opt_series("xi_srup"),
            mu_sr_dn=opt_scalar("mu_srdn"),
            xi_sr_dn=opt_series("xi_srdn"),
        )

    return EsSchedule(
        grid_periods=T,
        delta_t=dt,
        charge=charge,
        discharge=discharge,
        net=net,
        r_up_charge=ruc,
        r_up_discharge=rud,
        r_dn_charge=rdc,
        r_dn_discharge=rdd,
        r_up=r_up,
        r_dn=r_dn,
        mode=mode,
        soc=soc,
        sigma_up=float(sol.values[m.variable("sigma_up").index]),
        sigma_dn=float(sol.values[m.variable("sigma_dn").index]),
        objective_value=sol.objective_value,
        nominal_profit=nominal,
        artifacts=artifacts,
    )
