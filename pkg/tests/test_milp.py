"""Model IR, LP text export/parse, and solve cross-checks."""

from __future__ import annotations

import math

import numpy as np
import pytest

from rvpp import backends, milp


def small_lp() -> milp.Model:
    m = milp.Model(name="small")
    x = m.add_variable("x", upper=4.0)
    y = m.add_variable("y", upper=3.0)
    m.add_constraint("cap", milp.LinearExpression.from_terms([(x.index, 1.0), (y.index, 1.0)]), "<=", 5.0)
    m.set_objective(milp.LinearExpression.from_terms([(x.index, 2.0), (y.index, 3.0)]))
    return m


def test_solve_small_lp():
    m = small_lp()
    sol = milp.solve(m, backends.ScipyHighsBackend())
    assert sol.status == "optimal"
    # y saturates first (higher price), x fills the remaining headroom.
    assert sol.objective_value == pytest.approx(2.0 * 2.0 + 3.0 * 3.0, abs=1e-9)
    assert sol.value_of(m.variable("y")) == pytest.approx(3.0, abs=1e-9)


def test_solve_small_mip_binary():
    m = milp.Model()
    x = m.add_variable("x", milp.BINARY)
    y = m.add_variable("y", milp.BINARY)
    z = m.add_variable("z", milp.BINARY)
    m.add_constraint(
        "knap",
        milp.LinearExpression.from_terms([(x.index, 3.0), (y.index, 4.0), (z.index, 5.0)]),
        "<=",
        7.0,
    )
    m.set_objective(milp.LinearExpression.from_terms([(x.index, 3.0), (y.index, 4.0), (z.index, 4.0)]))
    sol = milp.solve(m, backends.ScipyHighsBackend())
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(7.0)


def test_infeasible_status():
    m = milp.Model()
    x = m.add_variable("x", upper=1.0)
    m.add_constraint("too_big", milp.LinearExpression.from_terms([(x.index, 1.0)]), ">=", 2.0)
    m.set_objective(milp.LinearExpression.from_terms([(x.index, 1.0)]))
    sol = milp.solve(m, backends.ScipyHighsBackend())
    assert sol.status == "infeasible"
    assert math.isnan(sol.objective_value)


def test_unbounded_status():
    m = milp.Model()
    x = m.add_variable("x", lower=-math.inf, upper=math.inf)
    m.set_objective(milp.LinearExpression.from_terms([(x.index, 1.0)]))
    sol = milp.solve(m, backends.ScipyHighsBackend())
    assert sol.status == "unbounded"


def test_inverted_bounds_rejected():
    m = milp.Model()
    with pytest.raises(milp.ModelError, match="inverted"):
        m.add_variable("x", lower=2.0, upper=1.0)


def test_duplicate_names_rejected():
    m = milp.Model()
    m.add_variable("x")
    with pytest.raises(milp.ModelError, match="duplicate"):
        m.add_variable("x")


def test_unknown_variable_in_constraint_rejected():
    m = milp.Model()
    m.add_variable("x")
    with pytest.raises(milp.ModelError, match="unknown variable"):
        m.add_constraint("bad", milp.LinearExpression(((5, 1.0),)), "<=", 1.0)


def test_nonfinite_coefficient_rejected():
    m = milp.Model()
    x = m.add_variable("x")
    with pytest.raises(milp.ModelError, match="non-finite"):
        m.add_constraint("bad", milp.LinearExpression(((x.index, math.inf),)), "<=", 1.0)


def test_empty_expression_constraint_is_allowed():
    # A constant-only row must still be checkable (it can encode 0 <= rhs).
    m = milp.Model()
    m.add_variable("x", upper=1.0)
    con = m.add_constraint("noop", milp.LinearExpression((), 0.0), "<=", 0.0)
    assert con.residual({0: 0.5}) == 0.0
    m.set_objective(milp.LinearExpression(((0, 1.0),)))
    sol = milp.solve(m, backends.ScipyHighsBackend())
    assert sol.status == "optimal"


def test_export_is_deterministic():
    a = milp.export_lp_text(small_lp())
    b = milp.export_lp_text(small_lp())
    assert a == b
    assert a.startswith("Maximize\n")
    assert a.endswith("End\n")


def test_export_writes_all_bound_forms():
    m = milp.Model()
    m.add_variable("fixed", lower=2.0, upper=2.0)
    m.add_variable("free_var", lower=-math.inf, upper=math.inf)
    m.add_variable("boxed", lower=-1.0, upper=3.5)
    m.add_variable("flag", milp.BINARY)
    m.set_objective(milp.LinearExpression(((0, 1.0),)))
    text = milp.export_lp_text(m)
    assert " fixed = 2.0" in text
    assert " free_var free" in text
    assert " -1.0 <= boxed <= 3.5" in text
    assert "Binaries" in text


def test_parse_round_trip_small():
    m = small_lp()
    parsed = backends.parse_lp_text(milp.export_lp_text(m))
    assert [v.name for v in parsed.variables] == [v.name for v in m.variables]
    assert len(parsed.constraints) == len(m.constraints)
    sol_a = milp.solve(m, backends.ScipyHighsBackend())
    sol_b = milp.solve(parsed, backends.ScipyHighsBackend())
    assert sol_b.objective_value == pytest.approx(sol_a.objective_value, rel=1e-9)


def _random_model(rng: np.random.Generator) -> milp.Model:
    """A random always-feasible model (origin is feasible by construction)."""
    m = milp.Model(name="rand")
    n_vars = int(rng.integers(2, 9))
    ids: list[int] = []
    for j in range(n_vars):
        kind = milp.BINARY if rng.random() < 0.3 else milp.CONTINUOUS
        if kind == milp.BINARY:
            v = m.add_variable(f"b{j}", kind)
        else:
            lo = 0.0 if rng.random() < 0.7 else -float(rng.integers(1, 5))
            hi = float(rng.integers(1, 10))
            v = m.add_variable(f"x{j}", kind, lower=lo, upper=hi)
        ids.append(v.index)
    n_cons = int(rng.integers(1, 7))
    for k in range(n_cons):
        picks = rng.choice(ids, size=min(len(ids), int(rng.integers(1, 4))), replace=False)
        coefs = rng.integers(-6, 7, size=len(picks)).astype(float)
        expr = milp.LinearExpression.from_terms([(int(i), float(c)) for i, c in zip(picks, coefs)])
        roll = rng.random()
        if roll < 0.4:
            m.add_constraint(f"c{k}", expr, "<=", float(rng.integers(0, 20)))
        elif roll < 0.8:
            m.add_constraint(f"c{k}", expr, ">=", -float(rng.integers(0, 20)))
        else:
            m.add_constraint(f"c{k}", expr, "=", 0.0)
    n_obj = min(len(ids), int(rng.integers(1, 5)))
    picks = rng.choice(ids, size=n_obj, replace=False)
    coefs = rng.normal(0.0, 3.0, size=n_obj).round(3)
    m.set_objective(
        milp.LinearExpression.from_terms([(int(i), float(c)) for i, c in zip(picks, coefs)]),
        milp.MAXIMIZE if rng.random() < 0.5 else milp.MINIMIZE,
    )
    return m


def test_lp_round_trip_property_100_models():
    """export -> parse -> solve matches a direct solve on 100 random models."""
    rng = np.random.default_rng(20260815)
    for trial in range(100):
        m = _random_model(rng)
        direct = milp.solve(m, backends.ScipyHighsBackend())
        assert direct.status == "optimal", f"trial {trial} unexpectedly {direct.status}"
        via_text = milp.solve(m, backends.LpTextBackend())
        assert via_text.status == "optimal"
        scale = max(1.0, abs(direct.objective_value))
        assert abs(via_text.objective_value - direct.objective_value) <= 1e-7 * scale, (
            f"trial {trial}: {direct.objective_value} vs {via_text.objective_value}"
        )
        # The text form itself must be stable under re-export.
        text = milp.export_lp_text(m)
        assert milp.export_lp_text(backends.parse_lp_text(text)) == text


def test_lp_text_backend_maps_values_to_original_ids():
    m = small_lp()
    sol = milp.solve(m, backends.LpTextBackend())
    assert sol.value_of(m.variable("y")) == pytest.approx(3.0, abs=1e-9)


def test_objective_recompute_guard():
    class LyingBackend(backends.ScipyHighsBackend):
        name = "liar"

        def objective_value(self) -> float:
            return super().objective_value() + 1.0

    with pytest.raises(milp.BackendError, match="disagrees"):
        milp.solve(small_lp(), LyingBackend())


def test_bound_violation_guard():
    class SloppyBackend(backends.ScipyHighsBackend):
        name = "sloppy"

        def values(self) -> dict[int, float]:
            vals = super().values()
            vals[0] = 99.0
            return vals

        def objective_value(self) -> float:
            return super().objective_value()

    with pytest.raises(milp.BackendError, match="bounds"):
        milp.solve(small_lp(), SloppyBackend())


def test_relaxation_probe_names_the_binding_rows():
    m = milp.Model()
    x = m.add_variable("x", upper=1.0)
    m.add_constraint("needs_two", milp.LinearExpression(((x.index, 1.0),)), ">=", 2.0)
    m.add_constraint("fine", milp.LinearExpression(((x.index, 1.0),)), "<=", 5.0)
    m.set_objective(milp.LinearExpression(((x.index, 1.0),)))
    report = milp.relaxation_probe(m, backends.ScipyHighsBackend)
    assert set(report) == {"needs_two"}
    assert report["needs_two"] == pytest.approx(1.0, abs=1e-6)


def test_get_backend_unknown_name():
    with pytest.raises(milp.BackendError, match="unknown backend"):
        backends.get_backend("cplex")


def test_get_backend_env_default(monkeypatch):
    monkeypatch.setenv(backends.BACKEND_ENV_VAR, "lp-text")
    assert isinstance(backends.get_backend(), backends.LpTextBackend)
    monkeypatch.delenv(backends.BACKEND_ENV_VAR)
    assert isinstance(backends.get_backend(), backends.ScipyHighsBackend)


def test_binary_count():
    m = milp.Model()
    m.add_variable("a", milp.BINARY)
    m.add_variable("b")
    m.add_variable("c", milp.BINARY)
    assert m.binary_count() == 2
