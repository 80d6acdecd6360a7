import csv
import math

import numpy as np
import pytest

from coldopt.analysis import (
    SWEEP_CSV_HEADER,
    SweepPoint,
    SweepResult,
    SweepSpec,
    check_trend,
    mc_shortage,
    resolve_parameter,
    sweep,
    sweep_feasibility_ok,
)
from coldopt.errors import DomainError
from coldopt.model import LeadTimeDemand

LTD = LeadTimeDemand(100.0, 200.0)


def _fake_result(totals):
    pts = []
    for i, t in enumerate(totals):
        if t is None:
            pts.append(SweepPoint(float(i), "infeasible", None))
        else:
            pts.append(SweepPoint(float(i), "optimal", type("S", (), {"total": t})()))
    return SweepResult("h", tuple(pts))


# --- sweeps ----------------------------------------------------------------

@pytest.mark.parametrize(
    "param,start,stop,steps,direction",
    [
        ("h", 12.0, 24.0, 7, "non_decreasing"),
        ("pi", 4.0, 10.0, 7, "non_decreasing"),
        ("b", 100.0, 400.0, 7, "non_decreasing"),
        ("d", 100.0, 400.0, 7, "non_decreasing"),
        ("Qual", 40.0, 105.5, 14, "non_decreasing"),
        ("B", 0.5, 6.0, 12, "non_increasing"),
    ],
)
def test_baseline_sweep_directions(baseline, param, start, stop, steps, direction):
    res = sweep(baseline.params, baseline.model, SweepSpec(param, start, stop, steps))
    assert len(res.points) == steps
    assert check_trend(res, direction).holds
    assert sweep_feasibility_ok(baseline.params, baseline.model, res)


def test_sweep_records_infeasible_points(baseline):
    # quality above the reachable maximum of 105.5 leaves the top points infeasible
    res = sweep(baseline.params, baseline.model, SweepSpec("Qual", 100.0, 120.0, 5))
    statuses = [pt.status for pt in res.points]
    assert statuses[0] == "optimal"
    assert statuses[-1] == "infeasible"
    assert all(pt.total is None for pt in res.points if pt.status == "infeasible")


def test_sweep_points_sorted_and_one_hot(baseline):
    res = sweep(baseline.params, baseline.model, SweepSpec("A", 500.0, 100.0, 5))
    values = [pt.value for pt in res.points]
    assert values == sorted(values)
    for pt in res.optimal():
        Y, Z = pt.solution.decision.one_hot()
        assert sum(Y) == 1 and sum(Z) == 1


def test_sweep_thread_count_independent(baseline, monkeypatch):
    spec = SweepSpec("pi", 4.0, 10.0, 6)
    monkeypatch.setenv("COLDOPT_THREADS", "1")
    one = sweep(baseline.params, baseline.model, spec).rows()
    monkeypatch.setenv("COLDOPT_THREADS", "8")
    many = sweep(baseline.params, baseline.model, spec).rows()
    assert one == many


def test_sweep_csv_roundtrip(baseline, tmp_path):
    res = sweep(baseline.params, baseline.model, SweepSpec("Qual", 90.0, 120.0, 4))
    out = tmp_path / "s.csv"
    res.write_csv(out)
    with open(out, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == SWEEP_CSV_HEADER
    assert len(rows) == 5
    for written, pt in zip(rows[1:], res.points):
        assert float(written[1]) == pt.value
        if pt.status == "optimal":
            assert float(written[3]) == pt.total
            assert float(written[4]) == pt.solution.decision.Q
        else:
            assert written[3:] == [""] * (len(SWEEP_CSV_HEADER) - 3)


def test_sweep_spec_validation():
    with pytest.raises(DomainError):
        SweepSpec("h", 1.0, 2.0, 1)
    with pytest.raises(DomainError):
        SweepSpec("h", 1.0, 1.0, 5)
    with pytest.raises(DomainError):
        SweepSpec("nope", 1.0, 2.0, 5)
    with pytest.raises(DomainError):
        SweepSpec("h", 1.0, math.inf, 5)


def test_resolve_parameter_aliases():
    assert resolve_parameter("pi") == "shortage_penalty"
    assert resolve_parameter("M2") == "packaging_costs[1]"
    assert resolve_parameter("holding_cost") == "holding_cost"


def test_sweep_rejects_invalid_swept_value(baseline):
    with pytest.raises(DomainError):
        sweep(baseline.params, baseline.model, SweepSpec("h", -1.0, 5.0, 3))


# --- trend checks ----------------------------------------------------------

def test_trend_constant_series_holds_both_ways():
    r = _fake_result([5.0, 5.0, 5.0])
    assert check_trend(r, "non_decreasing").holds
    assert check_trend(r, "non_increasing").holds


def test_trend_reports_first_violation_index():
    r = _fake_result([1.0, None, 2.0, 1.5, 3.0])
    v = check_trend(r, "non_decreasing")
    assert not v.holds and v.first_violation == 3


def test_trend_skips_infeasible_points():
    assert check_trend(_fake_result([3.0, None, 2.0, None, 1.0]), "non_increasing").holds


def test_trend_tolerates_relative_noise():
    assert check_trend(_fake_result([1000.0, 1000.0 - 1e-4]), "non_decreasing").holds
    assert not check_trend(_fake_result([1000.0, 1000.0 - 1e-2]), "non_decreasing").holds


def test_trend_needs_two_optimal_points():
    with pytest.raises(DomainError):
        check_trend(_fake_result([1.0, None, None]), "non_decreasing")
    with pytest.raises(DomainError):
        check_trend(_fake_result([1.0, 2.0]), "sideways")


# --- Monte Carlo -----------------------------------------------------------

def test_mc_at_upper_support_is_exactly_zero():
    rep = mc_shortage(200.0, LTD, 10_000, 7)
    assert rep.estimate == 0.0 and rep.analytic == 0.0 and rep.std_error == 0.0
    assert rep.z_score == 0.0


@pytest.mark.parametrize("R,analytic", [(150.0, 12.5), (100.0, 50.0)])
def test_mc_matches_closed_form(R, analytic):
    rep = mc_shortage(R, LTD, 1_000_000, 7)
    assert rep.analytic == pytest.approx(analytic)
    assert abs(rep.z_score) <= 4.0


def test_mc_standard_error_scales_as_inverse_sqrt():
    se = [mc_shortage(150.0, LTD, n, 11).std_error for n in (10_000, 100_000, 1_000_000)]
    for a, b in zip(se, se[1:]):
        assert a / b == pytest.approx(math.sqrt(10), rel=0.2)


def test_mc_is_seed_deterministic():
    a = mc_shortage(130.0, LTD, 1000, 3)
    b = mc_shortage(130.0, LTD, 1000, 3)
    c = mc_shortage(130.0, LTD, 1000, 4)
    assert a == b
    assert a.estimate != c.estimate


def test_mc_rejects_bad_input():
    with pytest.raises(DomainError):
        mc_shortage(150.0, LTD, 0, 1)
    with pytest.raises(DomainError):
        mc_shortage(250.0, LTD, 10, 1)


def test_mc_estimate_is_nonnegative_mean():
    rep = mc_shortage(180.0, LTD, 5000, 9)
    assert rep.estimate >= 0.0
    assert np.isfinite(rep.z_score)
