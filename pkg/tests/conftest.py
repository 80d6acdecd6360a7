import pytest

from coldopt import rng
from coldopt.model import LeadTimeDemand, ScenarioParameters
from coldopt.scenario import parse_scenario, shipped_scenario
from coldopt.solver import InfeasibilityDiagnosis, solve

# Published parameter ranges used to draw random instances.
TABLE4_RANGES = {
    "max_avg_shortage": (0.0, 6.0),
    "min_quality": (40.0, 100.0),
    "space_per_unit": (1.0, 3.0),
    "annual_demand": (5000.0, 15000.0),
    "ordering_cost": (100.0, 500.0),
    "capacity": (1000.0, 2000.0),
    "holding_cost": (12.0, 24.0),
    "shortage_penalty": (4.0, 10.0),
    "temp_var_cost": (10.0, 20.0),
    "hum_var_cost": (10.0, 20.0),
    "temp_fixed_cost": (100.0, 400.0),
    "hum_fixed_cost": (100.0, 400.0),
    "max_orders": (10.0, 30.0),
}

_ACCEPTANCE_LINES = []


def record_acceptance(criterion, passed, detail):
    _ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def baseline():
    return parse_scenario(shipped_scenario("baseline"))


@pytest.fixture(scope="session")
def table4():
    return parse_scenario(shipped_scenario("paper_table4"))


def lot_params(**overrides):
    """Bare lot-size instance: climate and packaging costs zeroed, limits loose."""
    kw = dict(
        annual_demand=1000.0,
        ordering_cost=0.0,
        holding_cost=10.0,
        shortage_penalty=10.0,
        temp_var_cost=0.0,
        hum_var_cost=0.0,
        temp_fixed_cost=0.0,
        hum_fixed_cost=0.0,
        packaging_costs=(0.0, 0.0, 0.0),
        environment_costs=(0.0, 0.0, 0.0),
        max_avg_shortage=1e9,
        min_quality=0.0,
        space_per_unit=1.0,
        capacity=1000.0,
        max_orders=1000.0,
        temp_lower=-5.0,
        temp_upper=5.0,
        hum_lower=60.0,
        hum_upper=90.0,
        reorder_lower=100.0,
        reorder_upper=200.0,
        lead_time_demand=LeadTimeDemand(100.0, 200.0),
    )
    kw.update(overrides)
    return ScenarioParameters(**kw)


def random_feasible_scenarios(base, model, count, seed=2024):
    """Draw instances uniformly from the published ranges, keeping feasible ones."""
    gen = rng.stream(seed, "scenarios")
    out = []
    while len(out) < count:
        p = base
        for name, (lo, hi) in TABLE4_RANGES.items():
            p = p.with_value(name, float(gen.uniform(lo, hi)))
        if not isinstance(solve(p, model), InfeasibilityDiagnosis):
            out.append(p)
    return out
