"""Domain types, cost function and constraint evaluation for the cold-warehouse model.

Everything in here is a pure function of its arguments. The solver, the grid
oracle and the analysis harness all evaluate candidate decisions through
:func:`cost_breakdown` and :func:`evaluate_constraints` so that feasibility and
cost are judged by one set of formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from itertools import product

from .errors import DomainError

LEVELS = (1, 2, 3)

CONSTRAINT_IDS = (
    "quality",
    "avg_shortage",
    "space",
    "frequency",
    "temp_box",
    "hum_box",
    "reorder_box",
    "positivity",
)


def feasibility_tolerance(bound: float) -> float:
    return 1e-6 * max(1.0, abs(bound))


def _check_level(name: str, level: int) -> int:
    if isinstance(level, bool) or level not in LEVELS:
        raise DomainError(f"{name} level must be one of {LEVELS}, got {level!r}")
    return int(level)


@dataclass(frozen=True)
class LeadTimeDemand:
    """Uniform lead-time demand on ``[lower, upper]`` (kg)."""

    lower: float = 100.0
    upper: float = 200.0

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise DomainError("lead-time demand bounds must be finite")
        if not (self.upper > self.lower >= 0):
            raise DomainError(
                f"lead-time demand needs upper > lower >= 0, got ({self.lower}, {self.upper})"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def mean(self) -> float:
        return (self.lower + self.upper) / 2


@dataclass(frozen=True)
class ScenarioParameters:
    """One fully specified problem instance.

    Costs tied to a replenishment cycle (ordering, climate fixed/variable,
    packaging, environment) are multiplied by the number of cycles per year
    ``D/Q`` inside the objective.
    """

    annual_demand: float
    ordering_cost: float
    holding_cost: float
    shortage_penalty: float
    temp_var_cost: float
    hum_var_cost: float
    temp_fixed_cost: float
    hum_fixed_cost: float
    packaging_costs: tuple[float, float, float]
    environment_costs: tuple[float, float, float]
    max_avg_shortage: float
    min_quality: float
    space_per_unit: float
    capacity: float
    max_orders: float
    temp_lower: float
    temp_upper: float
    hum_lower: float
    hum_upper: float
    reorder_lower: float
    reorder_upper: float
    lead_time_demand: LeadTimeDemand = field(default_factory=LeadTimeDemand)

    def __post_init__(self):
        object.__setattr__(self, "packaging_costs", tuple(float(v) for v in self.packaging_costs))
        object.__setattr__(self, "environment_costs", tuple(float(v) for v in self.environment_costs))
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                if len(value) != 3:
                    raise DomainError(f"{f.name} must have exactly 3 entries")
                if not all(math.isfinite(v) for v in value):
                    raise DomainError(f"{f.name} entries must be finite")
            elif isinstance(value, (int, float)) and not math.isfinite(value):
                raise DomainError(f"{f.name} must be finite, got {value}")

        positive = ("annual_demand", "holding_cost", "space_per_unit", "capacity", "max_orders")
        nonneg = (
            "ordering_cost",
            "shortage_penalty",
            "temp_var_cost",
            "hum_var_cost",
            "temp_fixed_cost",
            "hum_fixed_cost",
            "max_avg_shortage",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in nonneg:
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("packaging_costs", "environment_costs"):
            if any(v < 0 for v in getattr(self, name)):
                raise DomainError(f"{name} entries must be >= 0")
        for lo, hi in (
            ("temp_lower", "temp_upper"),
            ("hum_lower", "hum_upper"),
            ("reorder_lower", "reorder_upper"),
        ):
            if not getattr(self, lo) < getattr(self, hi):
                raise DomainError(f"{lo} must be < {hi}")
        ltd = self.lead_time_demand
        if not (ltd.lower <= self.reorder_lower and self.reorder_upper <= ltd.upper):
            raise DomainError(
                "reorder bounds must lie inside the lead-time demand support "
                f"[{ltd.lower}, {ltd.upper}]"
            )

    def with_value(self, name: str, value: float) -> "ScenarioParameters":
        """Copy with one scalar field replaced (``packaging_costs[1]`` style indexing allowed)."""
        if name.endswith("]") and "[" in name:
            base, idx = name[:-1].split("[")
            current = list(getattr(self, base))
            current[int(idx)] = value
            return replace(self, **{base: tuple(current)})
        if name in ("demand_lower", "demand_upper"):
            ltd = self.lead_time_demand
            lower = value if name == "demand_lower" else ltd.lower
            upper = value if name == "demand_upper" else ltd.upper
            return replace(self, lead_time_demand=LeadTimeDemand(lower, upper))
        return replace(self, **{name: value})

    @property
    def min_lot(self) -> float:
        """Smallest lot size allowed by the order-frequency limit."""
        return self.annual_demand / self.max_orders

    @property
    def space_limit(self) -> float:
        """Largest ``Q + R`` allowed by the storage capacity."""
        return self.capacity / self.space_per_unit


@dataclass(frozen=True)
class QualityModel:
    x1: float
    x2: float
    x3: float
    x4: float
    intercept: float

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise DomainError(f"quality model coefficient {f.name} must be finite")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.x1, self.x2, self.x3, self.x4, self.intercept)


@dataclass(frozen=True)
class DecisionVector:
    Q: float
    R: float
    T: float
    HU: float
    packaging: int = 1
    environment: int = 1

    def __post_init__(self):
        if not self.Q > 0:
            raise DomainError(f"lot size Q must be > 0, got {self.Q}")
        object.__setattr__(self, "packaging", _check_level("packaging", self.packaging))
        object.__setattr__(self, "environment", _check_level("environment", self.environment))

    def one_hot(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Binary selection vectors (Y, Z) for packaging and environment."""
        Y = tuple(int(j == self.packaging) for j in LEVELS)
        Z = tuple(int(j == self.environment) for j in LEVELS)
        return Y, Z


@dataclass(frozen=True)
class CostBreakdown:
    ordering: float
    holding: float
    shortage: float
    temperature: float
    humidity: float
    packaging: float
    environment: float

    @property
    def total(self) -> float:
        return (
            self.ordering
            + self.holding
            + self.shortage
            + self.temperature
            + self.humidity
            + self.packaging
            + self.environment
        )

    def as_dict(self) -> dict[str, float]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["total"] = self.total
        return d


@dataclass(frozen=True)
class ConstraintEntry:
    id: str
    lhs: float
    bound: float
    slack: float

    @property
    def satisfied(self) -> bool:
        return self.slack >= -feasibility_tolerance(self.bound)

    @property
    def active(self) -> bool:
        return abs(self.slack) <= feasibility_tolerance(self.bound)


@dataclass(frozen=True)
class ConstraintReport:
    entries: tuple[ConstraintEntry, ...]

    def __getitem__(self, key: str) -> ConstraintEntry:
        for entry in self.entries:
            if entry.id == key:
                return entry
        raise KeyError(key)

    def __iter__(self):
        return iter(self.entries)

    @property
    def all_satisfied(self) -> bool:
        return all(e.satisfied for e in self.entries)

    def violated(self) -> list[str]:
        return [e.id for e in self.entries if not e.satisfied]

    def active(self) -> list[str]:
        return [e.id for e in self.entries if e.active]


def expected_shortage_per_cycle(R: float, demand: LeadTimeDemand) -> float:
    """Expected backorder per cycle, E[(X - R)+] for X ~ Uniform(lower, upper)."""
    if not demand.lower <= R <= demand.upper:
        raise DomainError(
            f"reorder point {R} outside lead-time demand support [{demand.lower}, {demand.upper}]"
        )
    return (demand.upper - R) ** 2 / (2 * demand.width)


def _uniform_excess(R: float, demand: LeadTimeDemand) -> float:
    # Exact E[(X-R)+] on the whole real line; equals the closed form inside the support.
    if R >= demand.upper:
        return 0.0
    if R <= demand.lower:
        return demand.mean() - R
    return (demand.upper - R) ** 2 / (2 * demand.width)


def expected_on_hand(Q: float, R: float, demand: LeadTimeDemand) -> float:
    """Average stock carried, ``Q/2 + R - mean``; left unclamped on purpose."""
    if not Q > 0:
        raise DomainError(f"lot size Q must be > 0, got {Q}")
    return Q / 2 + R - demand.mean()


def quality_score(model: QualityModel, T: float, HU: float, packaging: int, environment: int) -> float:
    packaging = _check_level("packaging", packaging)
    environment = _check_level("environment", environment)
    return model.x1 * T + model.x2 * HU + model.x3 * packaging + model.x4 * environment + model.intercept


def cost_breakdown(params: ScenarioParameters, decision: DecisionVector) -> CostBreakdown:
    p = params
    cycles = p.annual_demand / decision.Q
    return CostBreakdown(
        ordering=cycles * p.ordering_cost,
        holding=p.holding_cost * expected_on_hand(decision.Q, decision.R, p.lead_time_demand),
        shortage=cycles * p.shortage_penalty * expected_shortage_per_cycle(decision.R, p.lead_time_demand),
        temperature=cycles * (p.temp_fixed_cost + p.temp_var_cost * (p.temp_upper - decision.T)),
        humidity=cycles * (p.hum_fixed_cost + p.hum_var_cost * (p.hum_upper - decision.HU)),
        packaging=cycles * p.packaging_costs[decision.packaging - 1],
        environment=cycles * p.environment_costs[decision.environment - 1],
    )


def _box_entry(cid: str, value: float, lower: float, upper: float) -> ConstraintEntry:
    below, above = value - lower, upper - value
    if below <= above:
        return ConstraintEntry(cid, value, lower, below)
    return ConstraintEntry(cid, value, upper, above)


def evaluate_constraints(
    params: ScenarioParameters, model: QualityModel, decision: DecisionVector
) -> ConstraintReport:
    p, x = params, decision
    score = quality_score(model, x.T, x.HU, x.packaging, x.environment)
    avg_shortage = p.annual_demand / x.Q * _uniform_excess(x.R, p.lead_time_demand)
    space = p.space_per_unit * (x.Q + x.R)
    frequency = p.annual_demand / x.Q
    positivity = min(x.Q, x.R)
    return ConstraintReport(
        (
            ConstraintEntry("quality", score, p.min_quality, score - p.min_quality),
            ConstraintEntry("avg_shortage", avg_shortage, p.max_avg_shortage, p.max_avg_shortage - avg_shortage),
            ConstraintEntry("space", space, p.capacity, p.capacity - space),
            ConstraintEntry("frequency", frequency, p.max_orders, p.max_orders - frequency),
            _box_entry("temp_box", x.T, p.temp_lower, p.temp_upper),
            _box_entry("hum_box", x.HU, p.hum_lower, p.hum_upper),
            _box_entry("reorder_box", x.R, p.reorder_lower, p.reorder_upper),
            ConstraintEntry("positivity", positivity, 0.0, positivity),
        )
    )


def max_achievable_quality(model: QualityModel, params: ScenarioParameters) -> tuple[float, tuple[float, float, int, int]]:
    """Best quality score reachable inside the climate boxes and level sets.

    The score is affine in (T, HU) and in the ordinal levels, so the maximum
    sits on a corner. Returns ``(score, (T, HU, packaging, environment))``;
    ties go to the first corner in (T, HU, packaging, environment) order.
    """
    best = None
    for T, HU, pkg, env in product(
        (params.temp_lower, params.temp_upper),
        (params.hum_lower, params.hum_upper),
        LEVELS,
        LEVELS,
    ):
        score = quality_score(model, T, HU, pkg, env)
        if best is None or score > best[0]:
            best = (score, (T, HU, pkg, env))
    return best


def max_quality_for_levels(
    model: QualityModel, params: ScenarioParameters, packaging: int, environment: int
) -> tuple[float, tuple[float, float]]:
    best = None
    for T, HU in product((params.temp_lower, params.temp_upper), (params.hum_lower, params.hum_upper)):
        score = quality_score(model, T, HU, packaging, environment)
        if best is None or score > best[0]:
            best = (score, (T, HU))
    return best
