"""One-at-a-time sensitivity sweeps, trend checks and Monte Carlo checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DomainError
from .io import write_csv_atomic
from .model import (
    LeadTimeDemand,
    QualityModel,
    ScenarioParameters,
    evaluate_constraints,
    expected_on_hand,
    expected_shortage_per_cycle,
)
from .solver import InfeasibilityDiagnosis, ordered_map, solve

# Short symbols accepted on the command line, mapped to ScenarioParameters fields.
PARAMETER_ALIASES = {
    "D": "annual_demand",
    "A": "ordering_cost",
    "h": "holding_cost",
    "pi": "shortage_penalty",
    "e": "temp_var_cost",
    "k": "hum_var_cost",
    "b": "temp_fixed_cost",
    "d": "hum_fixed_cost",
    "B": "max_avg_shortage",
    "Qual": "min_quality",
    "f": "space_per_unit",
    "F": "capacity",
    "n": "max_orders",
    "Tl": "temp_lower",
    "Tu": "temp_upper",
    "HUl": "hum_lower",
    "HUu": "hum_upper",
    "Rl": "reorder_lower",
    "Ru": "reorder_upper",
    "Dl": "demand_lower",
    "Du": "demand_upper",
    **{f"M{j}": f"packaging_costs[{j - 1}]" for j in (1, 2, 3)},
    **{f"N{j}": f"environment_costs[{j - 1}]" for j in (1, 2, 3)},
}
SWEEPABLE = frozenset(PARAMETER_ALIASES.values())

SWEEP_CSV_HEADER = (
    "param", "value", "status", "total", "Q", "R", "T", "HU", "packaging", "environment",
    "ordering", "holding", "shortage", "temperature", "humidity", "pack_cost", "env_cost", "kkt_residual",
)


def resolve_parameter(name: str) -> str:
    field = PARAMETER_ALIASES.get(name, name)
    if field not in SWEEPABLE:
        raise DomainError(f"unknown sweep parameter {name!r}; choose from {', '.join(sorted(PARAMETER_ALIASES))}")
    return field


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        resolve_parameter(self.parameter)
        if not (math.isfinite(self.start) and math.isfinite(self.stop)) or self.start == self.stop:
            raise DomainError("sweep needs finite, distinct start and stop values")
        if int(self.steps) != self.steps or self.steps < 2:
            raise DomainError(f"sweep needs at least 2 steps, got {self.steps}")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, int(self.steps))


@dataclass(frozen=True)
class SweepPoint:
    value: float
    status: str  # optimal | infeasible
    solution: object  # Solution or InfeasibilityDiagnosis
    on_hand: float | None = None

    @property
    def total(self) -> float | None:
        return self.solution.total if self.status == "optimal" else None


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    points: tuple[SweepPoint, ...]

    def optimal(self) -> list[SweepPoint]:
        return [pt for pt in self.points if pt.status == "optimal"]

    def rows(self) -> list[list]:
        rows = []
        for pt in self.points:
            if pt.status != "optimal":
                rows.append([self.parameter, pt.value, pt.status] + [None] * (len(SWEEP_CSV_HEADER) - 3))
                continue
            s = pt.solution
            d, c = s.decision, s.breakdown
            rows.append([
                self.parameter, pt.value, pt.status, c.total, d.Q, d.R, d.T, d.HU, d.packaging, d.environment,
                c.ordering, c.holding, c.shortage, c.temperature, c.humidity, c.packaging, c.environment,
                s.kkt_residual,
            ])
        return rows

    def write_csv(self, path) -> None:
        write_csv_atomic(path, SWEEP_CSV_HEADER, self.rows())


def sweep(params: ScenarioParameters, model: QualityModel, spec: SweepSpec) -> SweepResult:
    """Re-solve with one parameter stepped across ``spec``; infeasible points are kept."""
    field = resolve_parameter(spec.parameter)

    def run(value):
        value = float(value)
        swept = params.with_value(field, value)
        outcome = solve(swept, model)
        if isinstance(outcome, InfeasibilityDiagnosis):
            return SweepPoint(value, "infeasible", outcome)
        d = outcome.decision
        return SweepPoint(value, "optimal", outcome, expected_on_hand(d.Q, d.R, swept.lead_time_demand))

    points = ordered_map(run, spec.values())
    points.sort(key=lambda pt: pt.value)
    return SweepResult(spec.parameter, tuple(points))


@dataclass(frozen=True)
class TrendVerdict:
    direction: str
    holds: bool
    first_violation: int | None  # index into SweepResult.points


def check_trend(result: SweepResult, direction: str) -> TrendVerdict:
    if direction not in ("non_decreasing", "non_increasing"):
        raise DomainError(f"direction must be non_decreasing or non_increasing, got {direction!r}")
    indexed = [(i, pt.total) for i, pt in enumerate(result.points) if pt.status == "optimal"]
    if len(indexed) < 2:
        raise DomainError("trend check needs at least 2 optimal sweep points")
    slack = 1e-6 * max(abs(t) for _, t in indexed)
    sign = 1.0 if direction == "non_decreasing" else -1.0
    for (_, prev), (i, cur) in zip(indexed, indexed[1:]):
        if sign * (cur - prev) < -slack:
            return TrendVerdict(direction, False, i)
    return TrendVerdict(direction, True, None)


def sweep_feasibility_ok(params: ScenarioParameters, model: QualityModel, result: SweepResult) -> bool:
    """Re-check every optimal sweep point against the constraint evaluator."""
    field = resolve_parameter(result.parameter)
    for pt in result.optimal():
        report = evaluate_constraints(params.with_value(field, pt.value), model, pt.solution.decision)
        if not report.all_satisfied:
            return False
    return True


@dataclass(frozen=True)
class McReport:
    estimate: float
    std_error: float
    n_samples: int
    analytic: float

    @property
    def z_score(self) -> float:
        if self.std_error > 0:
            return (self.estimate - self.analytic) / self.std_error
        return 0.0 if self.estimate == self.analytic else math.copysign(math.inf, self.estimate - self.analytic)


def mc_shortage(R: float, demand: LeadTimeDemand, n: int, seed: int) -> McReport:
    """Sample mean of (X - R)+ over ``n`` uniform lead-time demands."""
    analytic = expected_shortage_per_cycle(R, demand)
    if n < 1:
        raise DomainError(f"need at least one sample, got {n}")
    x = rng.stream(seed, "lead_time_demand").uniform(demand.lower, demand.upper, size=n)
    excess = np.maximum(x - R, 0.0)
    estimate = float(excess.mean())
    std_error = float(excess.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McReport(estimate=estimate, std_error=std_error, n_samples=n, analytic=analytic)
