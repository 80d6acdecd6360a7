import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coldopt.errors import DomainError
from coldopt.model import (
    DecisionVector,
    LeadTimeDemand,
    QualityModel,
    cost_breakdown,
    evaluate_constraints,
    expected_on_hand,
    expected_shortage_per_cycle,
    max_achievable_quality,
    quality_score,
)
from coldopt.quality import BASELINE_MODEL, PAPER_TABLE4_MODEL

from conftest import lot_params

U = LeadTimeDemand(100.0, 200.0)


def test_lead_time_demand_invariants():
    assert U.mean() == 150.0
    with pytest.raises(DomainError):
        LeadTimeDemand(200.0, 100.0)
    with pytest.raises(DomainError):
        LeadTimeDemand(-1.0, 100.0)


@pytest.mark.parametrize("R, expected", [(200.0, 0.0), (150.0, 12.5), (100.0, 50.0)])
def test_expected_shortage_examples(R, expected):
    assert expected_shortage_per_cycle(R, U) == expected


@pytest.mark.parametrize("R", [99.999, 200.001, -5.0])
def test_expected_shortage_outside_support(R):
    with pytest.raises(DomainError):
        expected_shortage_per_cycle(R, U)


@given(lo=st.floats(0, 500), width=st.floats(1, 500))
def test_expected_shortage_shape(lo, width):
    demand = LeadTimeDemand(lo, lo + width)
    assert expected_shortage_per_cycle(demand.upper, demand) == 0.0
    assert math.isclose(expected_shortage_per_cycle(demand.lower, demand), width / 2, rel_tol=1e-12)
    R = np.linspace(demand.lower, demand.upper, 201)
    S = np.array([expected_shortage_per_cycle(r, demand) for r in R])
    assert np.all(np.diff(S[:-1]) < 0)
    assert np.all(np.diff(S, 2) >= -1e-9 * width)


@pytest.mark.parametrize(
    "Q, R, expected", [(300.0, 150.0, 150.0), (100.0, 100.0, 0.0), (1000.0, 200.0, 550.0)]
)
def test_expected_on_hand_examples(Q, R, expected):
    assert expected_on_hand(Q, R, U) == expected


def test_expected_on_hand_rejects_nonpositive_lot():
    with pytest.raises(DomainError):
        expected_on_hand(0.0, 150.0, U)


def test_quality_score_examples():
    assert quality_score(PAPER_TABLE4_MODEL, 0, 0, 1, 1) == pytest.approx(86.77, abs=1e-9)
    assert quality_score(PAPER_TABLE4_MODEL, 5, 63.6, 1, 1) == pytest.approx(-2112.046, abs=1e-9)
    assert quality_score(BASELINE_MODEL, -5, 60, 3, 3) == pytest.approx(105.5, abs=1e-12)


@pytest.mark.parametrize("pkg, env", [(0, 1), (1, 4), (2.5, 1)])
def test_quality_score_rejects_bad_level(pkg, env):
    with pytest.raises(DomainError):
        quality_score(BASELINE_MODEL, 0, 70, pkg, env)


@given(
    T1=st.floats(-10, 10), H1=st.floats(0, 100), T2=st.floats(-10, 10), H2=st.floats(0, 100),
    pkg=st.sampled_from([1, 2, 3]), env=st.sampled_from([1, 2, 3]),
)
def test_quality_score_is_affine(T1, H1, T2, H2, pkg, env):
    m = PAPER_TABLE4_MODEL
    mid = quality_score(m, (T1 + T2) / 2, (H1 + H2) / 2, pkg, env)
    avg = (quality_score(m, T1, H1, pkg, env) + quality_score(m, T2, H2, pkg, env)) / 2
    scale = max(abs(mid), abs(avg), abs(m.x2) * 100)
    assert abs(mid - avg) <= 1e-12 * scale


def _cost_params(**kw):
    base = dict(
        annual_demand=1000.0, ordering_cost=100.0, holding_cost=10.0, shortage_penalty=2.0,
        temp_fixed_cost=50.0, temp_var_cost=13.0, hum_fixed_cost=60.0, hum_var_cost=17.0,
        packaging_costs=(5.0, 6.0, 7.0), environment_costs=(7.0, 8.0, 9.0),
    )
    base.update(kw)
    return lot_params(**base)


def test_cost_breakdown_hand_example():
    p = _cost_params()
    c = cost_breakdown(p, DecisionVector(1000.0, 200.0, p.temp_upper, p.hum_upper, 1, 1))
    assert c.as_dict() == pytest.approx(
        dict(ordering=100, holding=5500, shortage=0, temperature=50, humidity=60, packaging=5, environment=7, total=5722)
    )


def test_cost_breakdown_ideal_climate_leaves_fixed_parts():
    p = _cost_params()
    c = cost_breakdown(p, DecisionVector(250.0, 170.0, p.temp_upper, p.hum_upper, 2, 3))
    assert c.temperature == pytest.approx(4 * 50.0)
    assert c.humidity == pytest.approx(4 * 60.0)


def test_cost_breakdown_doubling_lot():
    p = _cost_params()
    a = cost_breakdown(p, DecisionVector(400.0, 200.0, p.temp_upper, p.hum_upper, 2, 2))
    b = cost_breakdown(p, DecisionVector(800.0, 200.0, p.temp_upper, p.hum_upper, 2, 2))
    for name in ("ordering", "temperature", "humidity", "packaging", "environment"):
        assert getattr(b, name) == pytest.approx(getattr(a, name) / 2)
    # holding: h(Q/2 + R - mu), Q/2 term doubles
    assert b.holding - a.holding == pytest.approx(p.holding_cost * 200.0)


def test_cost_total_is_sum_of_components(baseline):
    p = baseline.params
    g = np.random.default_rng(11)
    for _ in range(1000):
        d = DecisionVector(
            g.uniform(1, 2000), g.uniform(100, 200), g.uniform(-5, 5), g.uniform(60, 90),
            int(g.integers(1, 4)), int(g.integers(1, 4)),
        )
        c = cost_breakdown(p, d)
        parts = [c.ordering, c.holding, c.shortage, c.temperature, c.humidity, c.packaging, c.environment]
        assert math.isclose(c.total, math.fsum(parts), rel_tol=1e-9)
        assert all(v >= 0 for i, v in enumerate(parts) if i != 1)
        if expected_on_hand(d.Q, d.R, p.lead_time_demand) >= 0:
            assert c.holding >= 0


def test_decision_vector_invariants():
    with pytest.raises(DomainError):
        DecisionVector(0.0, 150, 0, 70)
    with pytest.raises(DomainError):
        DecisionVector(10.0, 150, 0, 70, packaging=4)
    assert DecisionVector(10.0, 150, 0, 70, 2, 3).one_hot() == ((0, 1, 0), (0, 0, 1))


def test_evaluate_constraints_baseline_shortage_violation(baseline):
    d = DecisionVector(500.0, 193.8, 5.0, 90.0, 1, 1)
    rep = evaluate_constraints(baseline.params, baseline.model, d)
    assert rep["avg_shortage"].lhs == pytest.approx(3.844, abs=1e-9)
    assert not rep["avg_shortage"].satisfied
    assert "avg_shortage" in rep.violated()


def test_evaluate_constraints_frequency_boundary(baseline):
    p = baseline.params
    d = DecisionVector(p.annual_demand / p.max_orders, 200.0, 5.0, 90.0, 1, 1)
    rep = evaluate_constraints(p, baseline.model, d)
    assert rep["frequency"].slack == 0.0
    assert rep["frequency"].satisfied


def test_evaluate_constraints_space_example():
    p = lot_params(space_per_unit=2.0, capacity=1500.0)
    rep = evaluate_constraints(p, BASELINE_MODEL, DecisionVector(400.0, 200.0, 0.0, 70.0))
    assert rep["space"].lhs == 1200.0
    assert rep["space"].slack == 300.0
    assert rep["space"].satisfied


def test_evaluate_constraints_reports_out_of_box_values(baseline):
    rep = evaluate_constraints(baseline.params, baseline.model, DecisionVector(600.0, 90.0, 7.0, 50.0))
    assert not rep["temp_box"].satisfied
    assert not rep["hum_box"].satisfied
    assert not rep["reorder_box"].satisfied
    assert rep["temp_box"].bound == 5.0


def test_constraint_tolerance_is_scaled():
    p = lot_params(space_per_unit=1.0, capacity=1000.0)
    just_over = DecisionVector(800.0 + 0.9e-3, 200.0, 0.0, 70.0)
    too_far = DecisionVector(800.0 + 1.1e-3, 200.0, 0.0, 70.0)
    assert evaluate_constraints(p, BASELINE_MODEL, just_over)["space"].satisfied
    assert not evaluate_constraints(p, BASELINE_MODEL, too_far)["space"].satisfied


@given(Q=st.floats(1, 5000), R=st.floats(100, 200))
def test_shortage_constraint_matches_cost_term(Q, R):
    p = _cost_params(shortage_penalty=3.0)
    d = DecisionVector(Q, R, 0.0, 70.0)
    lhs = evaluate_constraints(p, BASELINE_MODEL, d)["avg_shortage"].lhs
    term = cost_breakdown(p, d).shortage / p.shortage_penalty
    assert math.isclose(lhs, term, rel_tol=1e-9, abs_tol=1e-300)


def test_max_achievable_quality_examples(baseline, table4):
    score, witness = max_achievable_quality(table4.model, table4.params)
    assert score == pytest.approx(-1848.15, abs=1e-9)
    assert witness == (-5.0, 60.0, 3, 3)
    score, witness = max_achievable_quality(baseline.model, baseline.params)
    assert score == pytest.approx(105.5, abs=1e-12)
    assert witness == (-5.0, 60.0, 3, 3)
    flat = QualityModel(0, 0, 0, 0, 42.0)
    assert max_achievable_quality(flat, baseline.params)[0] == 42.0


@settings(max_examples=200)
@given(T=st.floats(-5, 5), HU=st.floats(60, 90), pkg=st.sampled_from([1, 2, 3]), env=st.sampled_from([1, 2, 3]))
def test_max_achievable_dominates(baseline, T, HU, pkg, env):
    for model in (baseline.model, PAPER_TABLE4_MODEL):
        best, _ = max_achievable_quality(model, baseline.params)
        assert best >= quality_score(model, T, HU, pkg, env) - 1e-9 * max(1.0, abs(best))


def test_scenario_parameter_invariants(baseline):
    p = baseline.params
    with pytest.raises(DomainError):
        p.with_value("temp_lower", 6.0)
    with pytest.raises(DomainError):
        p.with_value("holding_cost", 0.0)
    with pytest.raises(DomainError):
        p.with_value("reorder_upper", 250.0)  # outside demand support
    assert p.with_value("packaging_costs[2]", 9.0).packaging_costs == (500.0, 1000.0, 9.0)
