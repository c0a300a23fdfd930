"""Command-line front end: load a problem file, run the pipeline
(classify -> construct -> integrate -> verify), emit machine-readable
reports.

Problem files are JSON objects with string-valued expression fields
{"phi", "B", "delta1"?, "delta2"?, "eta"?, "rho1"?, "rho2"?,
 "params": {...}, "t0", "t_end", "x0", "v0"}.

Exit codes: 0 pass, 1 check/drift-gate failure, 2 input error,
3 integration abort before 10% of the window.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from . import catalog
from . import expr as ex
from .expr import Expr, ParseError, parse
from .integrate import drift_report, evaluate_along, integrate
from .invariants import (
    FIRST_INTEGRAL,
    autonomous_aux,
    check_general_hypotheses,
    check_y_ode,
    first_integral_autonomous,
    nonlocal_autonomous,
    nonlocal_general,
    nonlocal_timedep_phi0,
    HypothesisError,
    DegenerateDenominatorError,
    NegativeRadicandError,
    MismatchedAuxPairError,
)
from .problem import (
    AUTONOMOUS,
    GENERAL,
    TIME_INDEPENDENT_PHI,
    CheckReport,
    JacobiProblem,
    LagrangianData,
    ProblemError,
    classify,
    validate_lagrangian,
)
from .verify import (
    PerturbationFamily,
    drift_gate,
    oracle_constant,
    oracle_drift_report,
    oracle_vs_closed,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_ABORT = 3

SCHEMA_VERSION = 1


class InputError(Exception):
    pass


# ------------------------------------------------------------- serializer

def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON: insertion-ordered keys, floats as %.12e."""
    pad = "  " * indent
    pad1 = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad1}{json.dumps(str(k))}: {dumps(v, indent + 1)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad1}{dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            obj = 99.0 if obj > 0 else -99.0
        return "%.12e" % obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------- loading

_EXPR_KEYS = ("phi", "B", "delta1", "delta2", "eta", "rho1", "rho2")
_NUM_KEYS = ("t0", "t_end", "x0", "v0")


def load_problem(data: dict) -> tuple[JacobiProblem, dict[str, Expr]]:
    if not isinstance(data, dict):
        raise InputError("problem file must contain a JSON object")
    for key in ("phi", "B", "t0", "t_end", "x0", "v0"):
        if key not in data:
            raise InputError(f"missing required key {key!r}")
    exprs: dict[str, Expr] = {}
    for key in _EXPR_KEYS:
        if key in data and data[key] is not None:
            if not isinstance(data[key], str):
                raise InputError(f"{key!r} must be an expression string")
            try:
                exprs[key] = parse(data[key])
            except ParseError as err:
                raise InputError(f"cannot parse {key!r}: {err}") from err
    nums = {}
    for key in _NUM_KEYS:
        try:
            nums[key] = float(data[key])
        except (TypeError, ValueError):
            raise InputError(f"{key!r} must be a number") from None
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise InputError("'params' must be an object")
    try:
        params = {str(k): float(v) for k, v in params.items()}
    except (TypeError, ValueError):
        raise InputError("'params' values must be numbers") from None
    domain = None
    if data.get("domain") is not None:
        try:
            tmin, tmax, xmin, xmax = (float(v) for v in data["domain"])
            domain = (tmin, tmax, xmin, xmax)
        except (TypeError, ValueError):
            raise InputError("'domain' must be [tmin, tmax, xmin, xmax]") from None
    try:
        problem = JacobiProblem(phi=exprs["phi"], B=exprs["B"], params=params,
                                domain=domain, **nums)
    except ProblemError as err:
        raise InputError(str(err)) from err
    return problem, exprs


def read_problem_file(path: str) -> tuple[JacobiProblem, dict[str, Expr], dict]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as err:
        raise InputError(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise InputError(f"{path} is not valid JSON: {err}") from err
    problem, exprs = load_problem(data)
    return problem, exprs, data


# ------------------------------------------------------------ pipeline

def _lagrangian_from(exprs: dict[str, Expr]) -> LagrangianData | None:
    delta1 = exprs.get("delta1")
    if delta1 is None and "eta" in exprs:
        delta1 = ex.diff(exprs["eta"], "x")
    delta2 = exprs.get("delta2")
    if delta1 is None and delta2 is None:
        return None
    return LagrangianData(delta1 if delta1 is not None else ex.ZERO,
                          delta2 if delta2 is not None else ex.ZERO,
                          eta=exprs.get("eta"))


def _report_of(check: CheckReport) -> dict:
    out = {
        "name": check.name,
        "passed": check.passed,
        "structural": check.structural,
        "residual": check.residual,
    }
    if check.warning:
        out["warning"] = check.warning
    return out


def run_checks(problem: JacobiProblem, exprs: dict[str, Expr]) -> tuple[dict, list]:
    """Classification plus every hypothesis check the input data allows."""
    cls = classify(problem)
    hypotheses: list[dict] = []
    specs = []

    def add(check: CheckReport):
        hypotheses.append(_report_of(check))

    try:
        if cls.tag == AUTONOMOUS:
            if "delta2" not in exprs:
                raise InputError("autonomous problems need 'delta2' "
                                 "(symbolic input preferred; see README)")
            L = _lagrangian_from(exprs) or LagrangianData(ex.ZERO, exprs["delta2"])
            for check in validate_lagrangian(problem, L):
                add(check)
            aux_p, aux_m = autonomous_aux(problem, exprs["delta2"])
            add(check_y_ode(problem, aux_p.bbar))
            specs.append(first_integral_autonomous(problem, exprs["delta2"]))
            specs.append(nonlocal_autonomous(problem, aux_p))
            specs.append(nonlocal_autonomous(problem, aux_m))
        elif cls.tag == TIME_INDEPENDENT_PHI:
            if "eta" not in exprs or "delta2" not in exprs:
                raise InputError("problems with time-free phi need 'eta' and 'delta2'")
            L = _lagrangian_from(exprs)
            if L is not None:
                for check in validate_lagrangian(problem, L):
                    add(check)
            psi = ex.simplify(ex.diff(exprs["eta"], "t") - exprs["delta2"])
            resid = ex.simplify(ex.Exp(problem.phi) * problem.B - ex.diff(psi, "x"))
            add(CheckReport.from_zero_check(
                "accumulator_hypothesis", resid,
                ex.zero_check(resid, problem.domain, params=problem.params)))
            specs.append(nonlocal_timedep_phi0(problem, exprs["eta"], exprs["delta2"]))
        else:
            if "rho1" not in exprs:
                raise InputError("general problems need 'rho1' (and optionally 'rho2')")
            rho1 = exprs["rho1"]
            rho2 = exprs.get("rho2", ex.ZERO)
            for check in check_general_hypotheses(problem, rho1, rho2):
                add(check)
            spec = nonlocal_general(problem, rho1, rho2)
            specs.append(spec)
            fi_check = {
                "name": "first_integral_condition",
                "passed": spec.kind == FIRST_INTEGRAL,
                "structural": True,
                "residual": "",
            }
            if spec.exp_closed_arg is not None:
                fi_check["closed_form_exponent"] = ex.pprint(spec.exp_closed_arg)
            hypotheses.append(fi_check)
    except (HypothesisError, NegativeRadicandError,
            DegenerateDenominatorError, MismatchedAuxPairError) as err:
        hypotheses.append({
            "name": type(err).__name__,
            "passed": False,
            "structural": False,
            "residual": str(err),
        })

    report = {
        "classification": {"tag": cls.tag, "warnings": list(cls.warnings)},
        "hypotheses": hypotheses,
        "pass": all(h["passed"] for h in hypotheses),
    }
    return report, specs


def _problem_echo(data: dict) -> dict:
    echo = {}
    for key in _EXPR_KEYS:
        if key in data and data[key] is not None:
            echo[key] = data[key]
    echo["params"] = {k: float(v) for k, v in sorted(data.get("params", {}).items())}
    for key in _NUM_KEYS:
        echo[key] = float(data[key])
    return echo


def _oracle_family_for(problem, exprs, tag) -> PerturbationFamily | None:
    if tag == AUTONOMOUS:
        aux_p, _ = autonomous_aux(problem, exprs["delta2"])
        return PerturbationFamily(a=aux_p.a, b=aux_p.b, sign=+1)
    if tag == GENERAL:
        from .invariants import general_aux

        aux_p, _ = general_aux(problem, exprs["rho1"], exprs.get("rho2", ex.ZERO))
        return PerturbationFamily(a=aux_p.a, b=aux_p.b, sign=+1)
    return PerturbationFamily(a=ex.ONE, b=ex.ZERO, sign=0)


def run_pipeline(problem: JacobiProblem, exprs: dict[str, Expr], data: dict,
                 tol: float = 1e-10, grid: int = 1024, oracle: bool = False,
                 threshold: float = 1e-6) -> tuple[dict, int, object]:
    """Full pipeline; returns (report, exit_code, trajectory)."""
    report, specs = run_checks(problem, exprs)
    report = {"schema": SCHEMA_VERSION, "problem": _problem_echo(data), **report}
    report["settings"] = {"tol": tol, "grid": grid, "oracle": oracle,
                          "threshold": threshold}
    if not report["pass"]:
        return report, EXIT_FAIL, None

    tols = (tol, tol)
    registered: list[Expr] = []
    for spec in specs:
        for g in spec.integrands:
            if not any(ex.simplify(g) == ex.simplify(r) for r in registered):
                registered.append(g)
    fam = None
    if oracle:
        try:
            fam = _oracle_family_for(problem, exprs, report["classification"]["tag"])
        except (HypothesisError, NegativeRadicandError, DegenerateDenominatorError) as err:
            raise InputError(f"oracle family unavailable: {err}") from err
        if fam.sign != 0 and not any(
                ex.simplify(fam.b) == ex.simplify(r) for r in registered):
            registered.append(fam.b)

    traj = integrate(problem, tuple(registered), tols)
    term = traj.termination
    report["termination"] = {"status": term.status, "t": term.t}
    if term.detail:
        report["termination"]["detail"] = term.detail
    window = problem.t_end - problem.t0
    if not term.completed and (traj.t_last - problem.t0) < 0.1 * window:
        return report, EXIT_ABORT, traj

    all_pass = True
    inv_reports = []
    for spec in specs:
        rep = drift_report(problem, spec, tuple(registered), tols, grid)
        gate = drift_gate(rep, threshold)
        all_pass = all_pass and gate
        entry = spec.to_jsonable()
        entry["drift"] = rep.to_jsonable()
        entry["gate"] = gate
        inv_reports.append(entry)
    report["invariants"] = inv_reports

    if oracle:
        L = _lagrangian_from(exprs)
        if L is None:
            raise InputError("--oracle needs Lagrangian data "
                             "(delta1/delta2, or eta and delta2)")
        o_grid = max(grid, 4096)
        closed_spec = specs[1] if len(specs) > 1 else specs[0]
        ser_oracle = oracle_constant(problem, L, fam, traj, o_grid)
        ser_closed = evaluate_along(traj, closed_spec, o_grid)
        disc = oracle_vs_closed(ser_oracle, ser_closed)
        # constancy gate in a regime where trajectory error dominates the
        # quadrature floor: finer prefix grid, moderate tolerance
        o_rep = oracle_drift_report(problem, L, fam, tuple(registered),
                                    (1e-8, 1e-8), 2 * o_grid)
        o_gate = drift_gate(o_rep, 1e-5)
        all_pass = all_pass and o_gate and disc < 1e-5
        report["oracle"] = {
            "family": {"a": ex.pprint(ex.simplify(fam.a)),
                       "b": ex.pprint(ex.simplify(fam.b)),
                       "sign": fam.sign},
            "compared_to": closed_spec.name,
            "max_discrepancy": disc,
            "drift": o_rep.to_jsonable(),
            "gate": o_gate,
        }

    report["pass"] = all_pass
    return report, (EXIT_PASS if all_pass else EXIT_FAIL), traj


# ------------------------------------------------------------- commands

def cmd_check(args) -> int:
    try:
        problem, exprs, data = read_problem_file(args.file)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    try:
        report, _ = run_checks(problem, exprs)
    except (InputError, ex.IllPosedDomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    report = {"schema": SCHEMA_VERSION, "problem": _problem_echo(data), **report}
    print(dumps(report))
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def cmd_run(args) -> int:
    try:
        problem, exprs, data = read_problem_file(args.file)
        report, code, traj = run_pipeline(
            problem, exprs, data, tol=args.tol, grid=args.grid,
            oracle=args.oracle, threshold=args.threshold)
    except (InputError, ex.IllPosedDomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    if args.out == "csv":
        if traj is not None:
            sys.stdout.write(traj.to_csv())
        return code
    print(dumps(report))
    return code


def _fixture_data(fx) -> dict:
    data = {
        "phi": ex.pprint(fx.problem.phi),
        "B": ex.pprint(fx.problem.B),
        "params": dict(fx.problem.params),
        "t0": fx.problem.t0, "t_end": fx.problem.t_end,
        "x0": fx.problem.x0, "v0": fx.problem.v0,
        "domain": list(fx.problem.domain),
    }
    data["delta1"] = ex.pprint(fx.lagrangian.delta1)
    data["delta2"] = ex.pprint(fx.lagrangian.delta2)
    for key, val in (("delta2", fx.delta2), ("eta", fx.eta),
                     ("rho1", fx.rho1), ("rho2", fx.rho2)):
        if val is not None:
            data[key] = ex.pprint(val)
    return data


def run_fixture(fixture_id: str, tol: float = 1e-10, grid: int = 1024,
                oracle: bool = True) -> tuple[dict, int]:
    fx = catalog.get(fixture_id)
    data = _fixture_data(fx)
    problem, exprs = load_problem(data)
    report, code, _ = run_pipeline(problem, exprs, data, tol=tol, grid=grid,
                                   oracle=oracle, threshold=fx.drift_threshold)
    report = {"fixture": fixture_id, **report}
    return report, code


def cmd_catalog(args) -> int:
    if args.action == "list":
        print(dumps({"fixtures": list(catalog.ids())}))
        return EXIT_PASS
    # action == "run"
    if args.all:
        reports = []
        worst = EXIT_PASS
        for fid in catalog.ids():
            report, code = run_fixture(fid, tol=args.tol, grid=args.grid,
                                       oracle=args.oracle)
            reports.append(report)
            worst = max(worst, code)
        print(dumps(reports))
        return worst
    if not args.id:
        print("error: catalog run needs a fixture id or --all", file=sys.stderr)
        return EXIT_INPUT
    try:
        report, code = run_fixture(args.id, tol=args.tol, grid=args.grid,
                                   oracle=args.oracle)
    except catalog.UnknownFixtureError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    print(dumps(report))
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="jacobi-invariants",
        description="Construct and verify constants of motion for "
                    "Jacobi-type second-order ODEs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="hypothesis checks only, no integration")
    p_check.add_argument("file", help="problem JSON file")
    p_check.set_defaults(fn=cmd_check)

    p_run = sub.add_parser("run", help="full pipeline on a problem file")
    p_run.add_argument("file", help="problem JSON file")
    p_run.add_argument("--tol", type=float, default=1e-10,
                       help="integration tolerance, absolute and relative "
                            "(default 1e-10)")
    p_run.add_argument("--grid", type=int, default=1024,
                       help="evaluation grid points (default 1024)")
    p_run.add_argument("--threshold", type=float, default=1e-6,
                       help="relative drift gate (default 1e-6)")
    p_run.add_argument("--oracle", action="store_true",
                       help="also run the brute-force variational oracle")
    p_run.add_argument("--out", choices=("json", "csv"), default="json",
                       help="report JSON or trajectory CSV (default json)")
    p_run.set_defaults(fn=cmd_run)

    p_cat = sub.add_parser("catalog", help="built-in fixture set")
    p_cat.add_argument("action", choices=("list", "run"))
    p_cat.add_argument("id", nargs="?", help="fixture id for 'run'")
    p_cat.add_argument("--all", action="store_true", help="run every fixture")
    p_cat.add_argument("--tol", type=float, default=1e-10)
    p_cat.add_argument("--grid", type=int, default=1024)
    p_cat.add_argument("--no-oracle", dest="oracle", action="store_false",
                       help="skip the oracle comparison")
    p_cat.set_defaults(fn=cmd_catalog, oracle=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    code = args.fn(args)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
