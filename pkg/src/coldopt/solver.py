"""Exact solver for the cold-warehouse lot-size / climate / packaging problem.

The mixed-integer program splits into three layers:

* the packaging and environment levels take 3 x 3 values and are enumerated;
* for fixed levels, temperature and humidity appear in the objective only
  through the per-cycle cost ``e(Tu - T) + k(HUu - HU)`` and in the quality
  constraint, both linear, so they are settled by a two-variable LP whose
  argmin does not depend on (Q, R);
* what remains is a convex problem in (Q, R) with a per-cycle cost ``a``:

      minimise  (D/Q)(a + pi*S(R)) + h(Q/2 + R - mu)

  subject to frequency, space, average-shortage and reorder-box limits.
  Every active set of at most two constraints is solved in closed form or by
  a one-dimensional root find, and the cheapest feasible candidate is the
  global optimum.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.optimize

from .errors import DomainError, NumericalError
from .model import (
    LEVELS,
    ConstraintReport,
    CostBreakdown,
    DecisionVector,
    QualityModel,
    ScenarioParameters,
    cost_breakdown,
    evaluate_constraints,
    feasibility_tolerance,
    max_achievable_quality,
    max_quality_for_levels,
    quality_score,
)

KKT_TOLERANCE = 1e-6


def worker_count() -> int:
    """Thread cap from ``COLDOPT_THREADS`` (default: up to 8 cores)."""
    raw = os.environ.get("COLDOPT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise DomainError(f"COLDOPT_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(8, os.cpu_count() or 1))


def ordered_map(fn, items):
    """``map`` that may use threads but always returns results in input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class Cause:
    kind: str  # quality_unreachable | frequency_vs_space | shortage_unreachable
    witness: dict

    def describe(self) -> str:
        w = self.witness
        if self.kind == "quality_unreachable":
            return (
                f"quality_unreachable: best achievable quality {w['max_quality']:.6g} "
                f"< required {w['required']:.6g}"
            )
        if self.kind == "frequency_vs_space":
            return (
                f"frequency_vs_space: space needed f*(D/n + Rl) = {w['space_needed']:.6g} "
                f"> capacity {w['capacity']:.6g}"
            )
        return (
            f"shortage_unreachable: least average shortage {w['min_avg_shortage']:.6g} "
            f"> limit {w['limit']:.6g}"
        )


@dataclass(frozen=True)
class InfeasibilityDiagnosis:
    causes: tuple[Cause, ...]

    def kinds(self) -> list[str]:
        return [c.kind for c in self.causes]

    def __getitem__(self, kind: str) -> Cause:
        for c in self.causes:
            if c.kind == kind:
                return c
        raise KeyError(kind)


@dataclass(frozen=True)
class ClimateResult:
    T_opt: float
    HU_opt: float
    variable_climate_cost: float
    binding: bool


@dataclass(frozen=True)
class LotResult:
    Q_opt: float
    R_opt: float
    active_set: frozenset
    cost: float


@dataclass(frozen=True)
class CombinationOutcome:
    packaging: int
    environment: int
    status: str  # optimal | climate_infeasible | lot_infeasible
    climate: ClimateResult | InfeasibilityDiagnosis
    lot: LotResult | InfeasibilityDiagnosis | None = None
    total: float | None = None
    decision: DecisionVector | None = None


@dataclass(frozen=True)
class Solution:
    decision: DecisionVector
    breakdown: CostBreakdown
    constraint_report: ConstraintReport
    kkt_residual: float
    combinations: tuple[CombinationOutcome, ...] = field(repr=False)
    active_set: frozenset = frozenset()

    @property
    def total(self) -> float:
        return self.breakdown.total


# ---------------------------------------------------------------------------
# climate layer


def solve_climate(
    params: ScenarioParameters, model: QualityModel, packaging: int, environment: int
) -> ClimateResult | InfeasibilityDiagnosis:
    """Cheapest (T, HU) meeting the quality floor for fixed levels.

    The feasible set is a box cut by one half-plane, so the optimum is one of
    at most eight polygon vertices: the box corners and the crossings of the
    quality line with the box edges.
    """
    p = params
    base = quality_score(model, 0.0, 0.0, packaging, environment)
    need = p.min_quality - base  # x1*T + x2*HU >= need
    tol = feasibility_tolerance(p.min_quality)

    Ts = (p.temp_lower, p.temp_upper)
    Hs = (p.hum_lower, p.hum_upper)
    candidates = [(T, H) for T in Ts for H in Hs]
    if model.x2 != 0:
        for T in Ts:
            H = (need - model.x1 * T) / model.x2
            if p.hum_lower <= H <= p.hum_upper:
                candidates.append((T, H))
    if model.x1 != 0:
        for H in Hs:
            T = (need - model.x2 * H) / model.x1
            if p.temp_lower <= T <= p.temp_upper:
                candidates.append((T, H))

    best = None
    for T, H in candidates:
        if model.x1 * T + model.x2 * H - need < -tol:
            continue
        cost = p.temp_var_cost * (p.temp_upper - T) + p.hum_var_cost * (p.hum_upper - H)
        if best is None:
            best = (cost, T, H)
            continue
        gap = cost - best[0]
        tie = abs(gap) <= 1e-12 * max(1.0, abs(cost), abs(best[0]))
        if (not tie and gap < 0) or (tie and (T, H) > (best[1], best[2])):
            best = (cost, T, H)

    if best is None:
        score, (T, H) = max_quality_for_levels(model, p, packaging, environment)
        return InfeasibilityDiagnosis(
            (Cause("quality_unreachable", {"max_quality": score, "required": p.min_quality, "T": T, "HU": H}),)
        )
    cost, T, H = best
    slack = model.x1 * T + model.x2 * H - need
    return ClimateResult(T_opt=T, HU_opt=H, variable_climate_cost=max(cost, 0.0), binding=abs(slack) <= tol)


# ---------------------------------------------------------------------------
# lot-size layer


def lot_cost(params: ScenarioParameters, a_eff: float, Q: float, R: float) -> float:
    p = params
    ltd = p.lead_time_demand
    S = (ltd.upper - R) ** 2 / (2 * ltd.width)
    return p.annual_demand / Q * (a_eff + p.shortage_penalty * S) + p.holding_cost * (Q / 2 + R - ltd.mean())


def _lot_slacks(params: ScenarioParameters, Q: float, R: float) -> dict[str, tuple[float, float]]:
    """Signed slack and the bound used to scale its tolerance, per lot constraint."""
    p = params
    ltd = p.lead_time_demand
    S = (ltd.upper - R) ** 2 / (2 * ltd.width) if R < ltd.upper else 0.0
    return {
        "frequency": (p.max_orders - p.annual_demand / Q, p.max_orders),
        "space": (p.capacity - p.space_per_unit * (Q + R), p.capacity),
        "avg_shortage": (p.max_avg_shortage - p.annual_demand / Q * S, p.max_avg_shortage),
        "reorder_lower": (R - p.reorder_lower, p.reorder_lower),
        "reorder_upper": (p.reorder_upper - R, p.reorder_upper),
    }


def _root(fn, lo: float, hi: float) -> float | None:
    """Root of an increasing function on (lo, inf), widening ``hi`` as needed."""
    flo = fn(lo)
    if flo > 0:
        return None
    if flo == 0:
        return lo
    for _ in range(200):
        if fn(hi) > 0:
            break
        hi *= 2
    else:
        return None
    return scipy.optimize.brentq(fn, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def _lot_candidates(params: ScenarioParameters, a: float) -> list[tuple[float, float, frozenset]]:
    """KKT candidates (Q, R, assumed active set) for every active set of size <= 2."""
    p = params
    D, h, pi, B = p.annual_demand, p.holding_cost, p.shortage_penalty, p.max_avg_shortage
    u, w = p.lead_time_demand.upper, p.lead_time_demand.width
    Qmin, C = p.min_lot, p.space_limit
    Rl, Ru = p.reorder_lower, p.reorder_upper

    def S(R):
        return (u - R) ** 2 / (2 * w)

    def eoq(R):
        # Q-stationarity for fixed R
        num = 2 * D * (a + pi * S(R)) / h
        return math.sqrt(num) if num > 0 else None

    def r_star(Q):
        # R-stationarity for fixed Q; none when there is no shortage penalty
        return u - h * w * Q / (D * pi) if pi > 0 else None

    out = []

    def add(Q, R, active):
        if Q is not None and R is not None and math.isfinite(Q) and math.isfinite(R) and Q > 0:
            out.append((Q, R, frozenset(active)))

    # nothing active: Q^2 (1 - hw/(D pi)) = 2Da/h
    if pi > 0:
        rho = h * w / (D * pi)
        if rho < 1 and a > 0:
            Q = math.sqrt(2 * D * a / (h * (1 - rho)))
            add(Q, r_star(Q), ())

    # one active
    add(Qmin, r_star(Qmin), ("frequency",))
    add(eoq(Rl), Rl, ("reorder_lower",))
    add(eoq(Ru), Ru, ("reorder_upper",))

    # space: R = C - Q; phi'(Q) = 0 gives Q^2 (D pi/(2w) - h/2) = D a + D pi k^2/(2w), k = u - C
    denom = D * pi / (2 * w) - h / 2
    if denom > 0:
        k = u - C
        num = D * a + D * pi * k * k / (2 * w)
        if num > 0:
            Q = math.sqrt(num / denom)
            add(Q, C - Q, ("space",))

    # average shortage: Q = c t^2 with t = u - R, c = D/(2wB); phi(t) = Da/(c t^2) + h c t^2/2 - h t
    if B > 0:
        c = D / (2 * w * B)
        dphi = lambda t: -2 * D * a / (c * t**3) + h * c * t - h
        t = _root(dphi, 1e-12 * max(1.0, u), max(1.0, 1.0 / c))
        if t is not None:
            add(c * t * t, u - t, ("avg_shortage",))
    else:
        # B == 0 pins R to the top of the demand support
        add(eoq(u), u, ("avg_shortage",))

    # two active: vertices of the feasible region
    add(Qmin, Rl, ("frequency", "reorder_lower"))
    add(Qmin, Ru, ("frequency", "reorder_upper"))
    add(Qmin, C - Qmin, ("frequency", "space"))
    add(C - Rl, Rl, ("space", "reorder_lower"))
    add(C - Ru, Ru, ("space", "reorder_upper"))
    if B > 0:
        t = math.sqrt(2 * w * B * Qmin / D)
        add(Qmin, u - t, ("frequency", "avg_shortage"))
        for R in (Rl, Ru):
            add(D * (u - R) ** 2 / (2 * w * B), R, ("avg_shortage", "reorder_lower" if R == Rl else "reorder_upper"))
        # D t^2/(2w) = B (C - u + t)
        qa, qb, qc = D / (2 * w), -B, -B * (C - u)
        disc = qb * qb - 4 * qa * qc
        if disc >= 0:
            for t in ((-qb + math.sqrt(disc)) / (2 * qa), (-qb - math.sqrt(disc)) / (2 * qa)):
                if t >= 0:
                    add(C - (u - t), u - t, ("avg_shortage", "space"))
    else:
        add(Qmin, u, ("frequency", "avg_shortage"))
        add(C - u, u, ("space", "avg_shortage"))
    return out


def _lot_feasible(params: ScenarioParameters, Q: float, R: float) -> bool:
    return all(s >= -feasibility_tolerance(b) for s, b in _lot_slacks(params, Q, R).values())


def _lot_active(params: ScenarioParameters, Q: float, R: float) -> frozenset:
    return frozenset(
        name for name, (s, b) in _lot_slacks(params, Q, R).items() if abs(s) <= feasibility_tolerance(b)
    )


def solve_lot(params: ScenarioParameters, a_eff: float) -> LotResult | InfeasibilityDiagnosis:
    """Globally optimal (Q, R) for per-cycle cost ``a_eff``."""
    if not (math.isfinite(a_eff) and a_eff >= 0):
        raise DomainError(f"per-cycle cost must be finite and >= 0, got {a_eff}")
    best = None
    for Q, R, _ in _lot_candidates(params, a_eff):
        if not _lot_feasible(params, Q, R):
            continue
        cost = lot_cost(params, a_eff, Q, R)
        if best is None or cost < best[0]:
            best = (cost, Q, R)
    if best is None:
        diag = _lot_diagnosis(params)
        if not diag:
            raise NumericalError("lot subproblem has no feasible KKT candidate but passes every relaxation check")
        return InfeasibilityDiagnosis(tuple(diag))
    cost, Q, R = best
    return LotResult(Q_opt=Q, R_opt=R, active_set=_lot_active(params, Q, R), cost=cost)


# ---------------------------------------------------------------------------
# infeasibility


def _lot_diagnosis(params: ScenarioParameters) -> list[Cause]:
    p = params
    Qmin, C = p.min_lot, p.space_limit
    need = p.space_per_unit * (Qmin + p.reorder_lower)
    if need > p.capacity + feasibility_tolerance(p.capacity):
        return [Cause("frequency_vs_space", {"space_needed": need, "capacity": p.capacity, "min_lot": Qmin})]
    # Least (D/Q) S(R) over the box: take Q = C - R, then minimise over R.
    u, w = p.lead_time_demand.upper, p.lead_time_demand.width
    r_hi = min(p.reorder_upper, C - Qmin)
    r_lo = p.reorder_lower
    cands = {r_lo, r_hi}
    if r_lo < 2 * C - u < r_hi:
        cands.add(2 * C - u)
    best = None
    for R in sorted(cands):
        value = p.annual_demand / (C - R) * ((u - R) ** 2 / (2 * w) if R < u else 0.0)
        if best is None or value < best[0]:
            best = (value, R, C - R)
    if best[0] > p.max_avg_shortage + feasibility_tolerance(p.max_avg_shortage):
        return [
            Cause(
                "shortage_unreachable",
                {"min_avg_shortage": best[0], "limit": p.max_avg_shortage, "Q": best[2], "R": best[1]},
            )
        ]
    return []


def diagnose_infeasibility(params: ScenarioParameters, model: QualityModel) -> InfeasibilityDiagnosis:
    causes = []
    score, (T, HU, pkg, env) = max_achievable_quality(model, params)
    if score < params.min_quality - feasibility_tolerance(params.min_quality):
        causes.append(
            Cause(
                "quality_unreachable",
                {"max_quality": score, "required": params.min_quality, "T": T, "HU": HU, "packaging": pkg, "environment": env},
            )
        )
    causes.extend(_lot_diagnosis(params))
    return InfeasibilityDiagnosis(tuple(causes))


# ---------------------------------------------------------------------------
# KKT certificate


def _gradients(params: ScenarioParameters, model: QualityModel, d: DecisionVector):
    """Objective gradient and constraint gradients (g <= 0 form) in (Q, R, T, HU)."""
    p = params
    ltd = p.lead_time_demand
    u, w = ltd.upper, ltd.width
    D, Q, R = p.annual_demand, d.Q, d.R
    S = (u - R) ** 2 / (2 * w) if R < u else 0.0
    dS = -(u - R) / w if R < u else 0.0
    per_cycle = (
        p.ordering_cost
        + p.temp_fixed_cost
        + p.temp_var_cost * (p.temp_upper - d.T)
        + p.hum_fixed_cost
        + p.hum_var_cost * (p.hum_upper - d.HU)
        + p.packaging_costs[d.packaging - 1]
        + p.environment_costs[d.environment - 1]
    )
    grad_f = np.array(
        [
            -D / Q**2 * (per_cycle + p.shortage_penalty * S) + p.holding_cost / 2,
            D / Q * p.shortage_penalty * dS + p.holding_cost,
            -D / Q * p.temp_var_cost,
            -D / Q * p.hum_var_cost,
        ]
    )
    cons = {
        "quality": np.array([0.0, 0.0, -model.x1, -model.x2]),
        "avg_shortage": np.array([-D * S / Q**2, D / Q * dS, 0.0, 0.0]),
        "space": np.array([p.space_per_unit, p.space_per_unit, 0.0, 0.0]),
        "frequency": np.array([-D / Q**2, 0.0, 0.0, 0.0]),
        "temp_lower": np.array([0.0, 0.0, -1.0, 0.0]),
        "temp_upper": np.array([0.0, 0.0, 1.0, 0.0]),
        "hum_lower": np.array([0.0, 0.0, 0.0, -1.0]),
        "hum_upper": np.array([0.0, 0.0, 0.0, 1.0]),
        "reorder_lower": np.array([0.0, -1.0, 0.0, 0.0]),
        "reorder_upper": np.array([0.0, 1.0, 0.0, 0.0]),
    }
    score = quality_score(model, d.T, d.HU, d.packaging, d.environment)
    slacks = {
        "quality": (score - p.min_quality, p.min_quality),
        "avg_shortage": (p.max_avg_shortage - D / Q * S, p.max_avg_shortage),
        "space": (p.capacity - p.space_per_unit * (Q + R), p.capacity),
        "frequency": (p.max_orders - D / Q, p.max_orders),
        "temp_lower": (d.T - p.temp_lower, p.temp_lower),
        "temp_upper": (p.temp_upper - d.T, p.temp_upper),
        "hum_lower": (d.HU - p.hum_lower, p.hum_lower),
        "hum_upper": (p.hum_upper - d.HU, p.hum_upper),
        "reorder_lower": (R - p.reorder_lower, p.reorder_lower),
        "reorder_upper": (p.reorder_upper - R, p.reorder_upper),
    }
    return grad_f, cons, slacks


def kkt_certificate(
    params: ScenarioParameters, model: QualityModel, decision: DecisionVector
) -> tuple[float, dict[str, float]]:
    """Stationarity residual and nonnegative multipliers of the active constraints.

    Multipliers come from a nonnegative least-squares fit of
    ``grad f + sum(lambda_i grad g_i) = 0`` over the active constraints. The
    residual norm is divided by ``max(1, |grad f|)`` so it is scale free.
    """
    report = evaluate_constraints(params, model, decision)
    if not report.all_satisfied:
        raise DomainError(f"KKT residual needs a feasible point; violated: {', '.join(report.violated())}")
    return _stationarity(*_gradients(params, model, decision))


def _stationarity(grad_f, cons, slacks) -> tuple[float, dict[str, float]]:
    active = [name for name, (s, b) in slacks.items() if abs(s) <= feasibility_tolerance(b)]
    scale = max(1.0, float(np.linalg.norm(grad_f)))
    if not active:
        return float(np.linalg.norm(grad_f)) / scale, {}
    J = np.column_stack([cons[name] for name in active])
    lam, resid = scipy.optimize.nnls(J, -grad_f)
    return float(resid) / scale, dict(zip(active, (float(v) for v in lam)))


def kkt_residual(params: ScenarioParameters, model: QualityModel, solution) -> float:
    decision = solution.decision if hasattr(solution, "decision") else solution
    return kkt_certificate(params, model, decision)[0]


# ---------------------------------------------------------------------------
# full problem


def per_cycle_cost(params: ScenarioParameters, climate: ClimateResult, packaging: int, environment: int) -> float:
    p = params
    return (
        p.ordering_cost
        + p.temp_fixed_cost
        + p.hum_fixed_cost
        + climate.variable_climate_cost
        + p.packaging_costs[packaging - 1]
        + p.environment_costs[environment - 1]
    )


def _solve_combination(params, model, levels) -> CombinationOutcome:
    pkg, env = levels
    climate = solve_climate(params, model, pkg, env)
    if isinstance(climate, InfeasibilityDiagnosis):
        return CombinationOutcome(pkg, env, "climate_infeasible", climate)
    lot = solve_lot(params, per_cycle_cost(params, climate, pkg, env))
    if isinstance(lot, InfeasibilityDiagnosis):
        return CombinationOutcome(pkg, env, "lot_infeasible", climate, lot)
    decision = DecisionVector(lot.Q_opt, lot.R_opt, climate.T_opt, climate.HU_opt, pkg, env)
    return CombinationOutcome(pkg, env, "optimal", climate, lot, cost_breakdown(params, decision).total, decision)


def pick_best(outcomes) -> CombinationOutcome | None:
    """Least total; outcomes arrive in lexicographic (packaging, environment) order so ties keep the first."""
    best = None
    for outcome in outcomes:
        if outcome.status == "optimal" and (best is None or outcome.total < best.total):
            best = outcome
    return best


def solve(params: ScenarioParameters, model: QualityModel) -> Solution | InfeasibilityDiagnosis:
    outcomes = tuple(ordered_map(lambda lv: _solve_combination(params, model, lv), product(LEVELS, LEVELS)))
    best = pick_best(outcomes)
    if best is None:
        diagnosis = diagnose_infeasibility(params, model)
        if not diagnosis.causes:
            raise NumericalError("every combination failed but no relaxation check explains it")
        return diagnosis
    decision = best.decision
    report = evaluate_constraints(params, model, decision)
    if not report.all_satisfied:
        raise NumericalError(f"solver returned an infeasible point; violated: {', '.join(report.violated())}")
    return Solution(
        decision=decision,
        breakdown=cost_breakdown(params, decision),
        constraint_report=report,
        kkt_residual=kkt_residual(params, model, decision),
        combinations=outcomes,
        active_set=best.lot.active_set,
    )


def lot_kkt_residual(params: ScenarioParameters, a_eff: float, Q: float, R: float) -> tuple[float, dict[str, float]]:
    """KKT residual of the bare (Q, R) problem with per-cycle cost ``a_eff``."""
    ltd = params.lead_time_demand
    u, w, D = ltd.upper, ltd.width, params.annual_demand
    S = (u - R) ** 2 / (2 * w) if R < u else 0.0
    dS = -(u - R) / w if R < u else 0.0
    grad_f = np.array(
        [
            -D / Q**2 * (a_eff + params.shortage_penalty * S) + params.holding_cost / 2,
            D / Q * params.shortage_penalty * dS + params.holding_cost,
        ]
    )
    cons = {
        "frequency": np.array([-D / Q**2, 0.0]),
        "space": np.array([params.space_per_unit, params.space_per_unit]),
        "avg_shortage": np.array([-D * S / Q**2, D / Q * dS]),
        "reorder_lower": np.array([0.0, -1.0]),
        "reorder_upper": np.array([0.0, 1.0]),
    }
    slacks = _lot_slacks(params, Q, R)
    if not all(s >= -feasibility_tolerance(b) for s, b in slacks.values()):
        raise DomainError("KKT residual needs a feasible point")
    return _stationarity(grad_f, cons, slacks)
