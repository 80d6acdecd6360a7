"""``coldopt`` command line.

Exit codes: 0 success, 2 usage / parse / domain errors, 3 infeasible model,
4 numerical failure (including a failed ``validate`` check).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import SweepSpec, check_trend, mc_shortage, sweep
from .errors import ColdOptError, DomainError, NumericalError, ScenarioError
from .io import write_csv_atomic, write_text_atomic
from .model import CONSTRAINT_IDS
from .oracle import grid_oracle
from .quality import fit_ols, generate_dataset, read_dataset_csv, write_dataset_csv
from .scenario import model_fragment, parse_scenario
from .solver import KKT_TOLERANCE, InfeasibilityDiagnosis, Solution, solve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

SOLUTION_CSV_HEADER = (
    "packaging", "environment", "status", "selected", "total", "Q", "R", "T", "HU", "climate_binding",
)
VALIDATION_CSV_HEADER = ("check", "value", "threshold", "passed")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _print_diagnosis(diag: InfeasibilityDiagnosis, out) -> None:
    print("status: infeasible", file=out)
    for cause in diag.causes:
        print(f"  {cause.describe()}", file=out)


def format_solution(sol: Solution) -> str:
    d, c = sol.decision, sol.breakdown
    lines = [
        "status: optimal",
        f"decision: Q={d.Q:.6f} R={d.R:.6f} T={d.T:.6f} HU={d.HU:.6f} packaging={d.packaging} environment={d.environment}",
        "annual cost:",
    ]
    for name, value in c.as_dict().items():
        lines.append(f"  {name:<12} {value:16.6f}")
    lines.append(f"active constraints: {', '.join(sorted(sol.constraint_report.active())) or 'none'}")
    lines.append(f"KKT residual: {sol.kkt_residual:.3e}")
    lines.append("combinations (packaging, environment):")
    for o in sol.combinations:
        mark = "*" if (o.packaging, o.environment) == (d.packaging, d.environment) else " "
        total = f"{o.total:16.6f}" if o.total is not None else f"{'-':>16}"
        lines.append(f" {mark} ({o.packaging},{o.environment}) {o.status:<20} {total}")
    return "\n".join(lines)


def _solution_rows(sol: Solution) -> list[list]:
    rows = []
    for o in sol.combinations:
        selected = (o.packaging, o.environment) == (sol.decision.packaging, sol.decision.environment)
        if o.status == "optimal":
            d = o.decision
            binding = getattr(o.climate, "binding", None)
            rows.append([o.packaging, o.environment, o.status, selected, o.total, d.Q, d.R, d.T, d.HU, binding])
        else:
            rows.append([o.packaging, o.environment, o.status, selected, None, None, None, None, None, None])
    return rows


def cmd_solve(args) -> int:
    scen = parse_scenario(args.scenario)
    result = solve(scen.params, scen.model)
    if isinstance(result, InfeasibilityDiagnosis):
        _print_diagnosis(result, sys.stdout)
        return EXIT_INFEASIBLE
    print(format_solution(result))
    out = Path(args.out_dir) / "solution.csv"
    write_csv_atomic(out, SOLUTION_CSV_HEADER, _solution_rows(result))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scen = parse_scenario(args.scenario)
    spec = SweepSpec(args.param, args.start, args.stop, args.steps)
    result = sweep(scen.params, scen.model, spec)
    out = Path(args.out or f"sweep_{args.param}.csv")
    result.write_csv(out)
    for pt in result.points:
        total = f"{pt.total:.6f}" if pt.total is not None else "-"
        print(f"{args.param}={pt.value:.6g} {pt.status} total={total}")
    for direction in ("non_decreasing", "non_increasing"):
        try:
            verdict = check_trend(result, direction)
        except DomainError:
            print(f"{direction}=n/a (fewer than 2 optimal points)")
            continue
        extra = "" if verdict.holds else f" (first violation at point {verdict.first_violation})"
        print(f"{direction}={'true' if verdict.holds else 'false'}{extra}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    scen = parse_scenario(args.scenario)
    if scen.generator is None:
        raise ScenarioError("scenario has no [generator] section", "generator")
    if args.n < 0:
        raise DomainError(f"--n must be >= 0, got {args.n}")
    data = generate_dataset(scen.generator, args.n)
    write_dataset_csv(data, args.out)
    print(f"wrote {len(data)} rows to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_dataset_csv(args.data)
    report = fit_ols(data)
    m = report.model
    print(f"rows: {report.n_rows}")
    print(f"x1={m.x1:.10g} x2={m.x2:.10g} x3={m.x3:.10g} x4={m.x4:.10g} intercept={m.intercept:.10g}")
    print(f"r_squared: {report.r_squared:.10f}")
    print(f"residual_std: {report.residual_std:.10g}")
    comment = f"fitted from {Path(args.data).name}: {report.n_rows} rows, r_squared={report.r_squared:.10f}"
    write_text_atomic(args.out, model_fragment(m, comment))
    print(f"wrote {args.out}")
    return EXIT_OK


def run_validation(scen, mc_samples: int = 1_000_000) -> list[tuple[str, float, float, bool]]:
    p, model = scen.params, scen.model
    sol = solve(p, model)
    if isinstance(sol, InfeasibilityDiagnosis):
        return sol
    checks = []
    o2 = grid_oracle(p, model, mode="2d")
    o4 = grid_oracle(p, model, mode="4d")
    same2 = (o2.decision.packaging, o2.decision.environment) == (sol.decision.packaging, sol.decision.environment)
    same4 = (o4.decision.packaging, o4.decision.environment) == (o2.decision.packaging, o2.decision.environment)
    gap2 = abs(sol.total - o2.total) / abs(sol.total)
    gap4 = abs(o4.total - o2.total) / abs(o2.total)
    checks.append(("oracle_2d_relative_gap", gap2, 1e-3, gap2 <= 1e-3))
    checks.append(("oracle_2d_same_combination", float(same2), 1.0, same2))
    checks.append(("oracle_4d_vs_2d_relative_gap", gap4, 5e-3, gap4 <= 5e-3))
    checks.append(("oracle_4d_same_combination", float(same4), 1.0, same4))
    checks.append(("kkt_residual", sol.kkt_residual, KKT_TOLERANCE, sol.kkt_residual <= KKT_TOLERANCE))
    for cid in CONSTRAINT_IDS:
        entry = sol.constraint_report[cid]
        checks.append((f"constraint_{cid}_slack", entry.slack, 0.0, entry.satisfied))
    ltd = p.lead_time_demand
    Rs = list(np.linspace(p.reorder_lower, p.reorder_upper, 5)) + [sol.decision.R]
    for R in Rs:
        rep = mc_shortage(float(R), ltd, mc_samples, scen.seed)
        z = abs(rep.z_score)
        checks.append((f"mc_shortage_R={float(R):.6g}_abs_z", z, 4.0, z <= 4.0))
    return checks


def cmd_validate(args) -> int:
    scen = parse_scenario(args.scenario)
    checks = run_validation(scen, args.mc_samples)
    if isinstance(checks, InfeasibilityDiagnosis):
        _print_diagnosis(checks, sys.stdout)
        return EXIT_INFEASIBLE
    width = max(len(c[0]) for c in checks)
    for name, value, threshold, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name:<{width}}  {value:.6e}  (threshold {threshold:g})")
    out = Path(args.out_dir) / "validation.csv"
    write_csv_atomic(out, VALIDATION_CSV_HEADER, [list(c) for c in checks])
    print(f"wrote {out}")
    return EXIT_OK if all(c[3] for c in checks) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coldopt", description=__doc__.splitlines()[0].strip("`"))
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve a scenario and write solution.csv")
    p.add_argument("scenario")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="one-parameter sensitivity sweep")
    p.add_argument("scenario")
    p.add_argument("--param", required=True)
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--out", default=None, help="CSV path (default sweep_<param>.csv)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-data", help="generate a synthetic quality dataset")
    p.add_argument("scenario")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("fit", help="fit the quality regression to a dataset CSV")
    p.add_argument("data")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="cross-check the solver against oracles and Monte Carlo")
    p.add_argument("scenario")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--mc-samples", type=int, default=1_000_000)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, DomainError) as exc:
        print(f"coldopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"coldopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError) as exc:
        print(f"coldopt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ColdOptError as exc:
        print(f"coldopt: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
