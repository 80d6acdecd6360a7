"""Brute-force grid oracle used to cross-check the exact solver.

The oracle never calls the solver's candidate machinery. It evaluates the
annual cost straight from the cost formula on a lattice, keeps the cheapest
feasible lattice point, then shrinks the lattice tenfold around that point and
repeats. An axis whose incumbent lies on an inner window edge is recentred at
the same width rather than shrunk, so the search can follow a drifting
optimum into a corner. ``mode="4d"`` grids (Q, R, T, HU) jointly; ``mode="2d"`` takes the
climate from :func:`solver.solve_climate` and grids only (Q, R).
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .errors import DomainError
from .model import LEVELS, DecisionVector, QualityModel, ScenarioParameters, cost_breakdown, evaluate_constraints
from .solver import (
    ClimateResult,
    CombinationOutcome,
    InfeasibilityDiagnosis,
    Solution,
    diagnose_infeasibility,
    kkt_residual,
    ordered_map,
    pick_best,
    solve_climate,
)

CONTRACTION = 10.0
# Extra same-width passes allowed when the incumbent sits on a window edge.
MAX_RECENTRE = 32


def _tol(bound):
    return 1e-6 * np.maximum(1.0, np.abs(bound))


def _lot_arrays(p: ScenarioParameters, Q, R):
    """Cost pieces and feasibility mask for broadcast arrays Q, R."""
    lo, hi = p.lead_time_demand.lower, p.lead_time_demand.upper
    excess = np.where(R >= hi, 0.0, (hi - R) ** 2 / (2 * (hi - lo)))
    cycles = p.annual_demand / Q
    base = cycles * (p.ordering_cost + p.temp_fixed_cost + p.hum_fixed_cost + p.shortage_penalty * excess)
    base = base + p.holding_cost * (Q / 2 + R - (lo + hi) / 2)
    ok = cycles * excess <= p.max_avg_shortage + _tol(p.max_avg_shortage)
    ok &= p.space_per_unit * (Q + R) <= p.capacity + _tol(p.capacity)
    ok &= cycles <= p.max_orders + _tol(p.max_orders)
    ok &= (R >= p.reorder_lower - _tol(p.reorder_lower)) & (R <= p.reorder_upper + _tol(p.reorder_upper))
    return cycles, base, ok


def _climate_arrays(p: ScenarioParameters, model: QualityModel, pkg: int, env: int, T, HU):
    cost = p.temp_var_cost * (p.temp_upper - T) + p.hum_var_cost * (p.hum_upper - HU)
    score = model.x1 * T + model.x2 * HU + model.x3 * pkg + model.x4 * env + model.intercept
    ok = score >= p.min_quality - _tol(p.min_quality)
    return cost, ok


def _window(center, width, lo, hi):
    a, b = center - width / 2, center + width / 2
    if a < lo:
        a, b = lo, min(hi, lo + width)
    if b > hi:
        a, b = max(lo, hi - width), hi
    return a, b


def _next_windows(windows, boxes, point, index, resolution):
    """Shrink tenfold around ``point``, unless it sits near an inner window edge.

    An incumbent closer than half a shrunken window to an edge that is not a
    box bound means the optimum may lie outside the window; that axis is
    recentred at the same width instead. Returns the new windows and whether
    any axis was recentred.
    """
    margin = (resolution - 1) / (2 * CONTRACTION)
    out, moved = [], False
    for (a, b), (lo, hi), x, i in zip(windows, boxes, point, index):
        width = b - a
        on_edge = i >= 0 and ((i < margin and a > lo) or (resolution - 1 - i < margin and b < hi))
        if on_edge:
            moved = True
        else:
            width /= CONTRACTION
        out.append(_window(x, width, lo, hi))
    return out, moved


def _refine(evaluate, boxes, resolution, rounds):
    """Shared lattice refinement loop; ``evaluate`` returns (value, point, index) or None."""
    windows = list(boxes)
    best = None
    done, extra = 0, 0
    while done < rounds:
        axes = [np.linspace(a, b, resolution) for a, b in windows]
        found = evaluate(axes)
        if found is not None and (best is None or found[0] < best[0]):
            best = found
        if best is None:
            return None
        # index of the incumbent on the current lattice, if it came from it
        index = best[2] if found is best else (-1,) * len(boxes)
        windows, moved = _next_windows(windows, boxes, best[1], index, resolution)
        if moved and extra < MAX_RECENTRE:
            extra += 1
        else:
            done += 1
    return best[0], best[1]


def _search_4d(p, model, pkg, env, resolution, rounds):
    boxes = [
        (p.min_lot, p.space_limit - p.reorder_lower),
        (p.reorder_lower, p.reorder_upper),
        (p.temp_lower, p.temp_upper),
        (p.hum_lower, p.hum_upper),
    ]
    if boxes[0][1] < boxes[0][0]:
        return None
    fixed = p.packaging_costs[pkg - 1] + p.environment_costs[env - 1]

    def evaluate(axes):
        Q, R = np.meshgrid(axes[0], axes[1], indexing="ij")
        T, HU = np.meshgrid(axes[2], axes[3], indexing="ij")
        cycles, base, lot_ok = _lot_arrays(p, Q, R)
        clim, clim_ok = _climate_arrays(p, model, pkg, env, T, HU)
        total = base[:, :, None, None] + cycles[:, :, None, None] * (fixed + clim[None, None, :, :])
        ok = lot_ok[:, :, None, None] & clim_ok[None, None, :, :]
        if not ok.any():
            return None
        masked = np.where(ok, total, np.inf)
        idx = np.unravel_index(np.argmin(masked), masked.shape)
        return float(masked[idx]), tuple(float(axes[i][idx[i]]) for i in range(4)), tuple(int(i) for i in idx)

    return _refine(evaluate, boxes, resolution, rounds)


def _search_2d(p, climate: ClimateResult, pkg, env, resolution, rounds):
    boxes = [(p.min_lot, p.space_limit - p.reorder_lower), (p.reorder_lower, p.reorder_upper)]
    if boxes[0][1] < boxes[0][0]:
        return None
    per_cycle = p.packaging_costs[pkg - 1] + p.environment_costs[env - 1] + climate.variable_climate_cost

    def evaluate(axes):
        Q, R = np.meshgrid(*axes, indexing="ij")
        cycles, base, ok = _lot_arrays(p, Q, R)
        if not ok.any():
            return None
        masked = np.where(ok, base + cycles * per_cycle, np.inf)
        idx = np.unravel_index(np.argmin(masked), masked.shape)
        return float(masked[idx]), (float(axes[0][idx[0]]), float(axes[1][idx[1]])), (int(idx[0]), int(idx[1]))

    found = _refine(evaluate, boxes, resolution, rounds)
    if found is None:
        return None
    return found[0], found[1] + (climate.T_opt, climate.HU_opt)


def grid_oracle(
    params: ScenarioParameters,
    model: QualityModel,
    resolution: int | None = None,
    refinement_rounds: int = 4,
    mode: str = "2d",
) -> Solution | InfeasibilityDiagnosis:
    """Best lattice point over all nine (packaging, environment) combinations.

    Default resolution is 128 points per axis in 2-D mode and 32 in 4-D mode
    (a 128^4 lattice does not fit in memory).
    """
    if mode not in ("2d", "4d"):
        raise DomainError(f"mode must be '2d' or '4d', got {mode!r}")
    if resolution is None:
        resolution = 128 if mode == "2d" else 32
    if resolution < 32:
        raise DomainError(f"resolution must be >= 32 points per axis, got {resolution}")
    if refinement_rounds < 1:
        raise DomainError(f"refinement_rounds must be >= 1, got {refinement_rounds}")

    def run(levels):
        pkg, env = levels
        if mode == "4d":
            found = _search_4d(params, model, pkg, env, resolution, refinement_rounds)
            climate = None
        else:
            climate = solve_climate(params, model, pkg, env)
            if isinstance(climate, InfeasibilityDiagnosis):
                return CombinationOutcome(pkg, env, "climate_infeasible", climate)
            found = _search_2d(params, climate, pkg, env, resolution, refinement_rounds)
        if found is None:
            return CombinationOutcome(pkg, env, "infeasible", climate)
        Q, R, T, HU = found[1]
        decision = DecisionVector(Q, R, T, HU, pkg, env)
        return CombinationOutcome(pkg, env, "optimal", climate, None, cost_breakdown(params, decision).total, decision)

    outcomes = tuple(ordered_map(run, product(LEVELS, LEVELS)))
    best = pick_best(outcomes)
    if best is None:
        return diagnose_infeasibility(params, model)
    decision = best.decision
    report = evaluate_constraints(params, model, decision)
    try:
        residual = kkt_residual(params, model, decision)
    except DomainError:
        residual = float("nan")
    return Solution(
        decision=decision,
        breakdown=cost_breakdown(params, decision),
        constraint_report=report,
        kkt_residual=residual,
        combinations=outcomes,
        active_set=frozenset(report.active()),
    )
