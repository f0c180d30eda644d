"""Command-line interface.

Every subcommand prints a deterministic report: floats are rendered with 17
significant digits, so identical inputs give byte-identical output.  CSV
columns are documented per subcommand in --help.  The environment variable
LAYERFORGE_THREADS caps parallelism inside sweep operations; LAYERFORGE_NUMBA
selects the accelerated kernels (auto/1) or the pure-numpy path (0).
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import acceptance, corrections, kink, locator, problem, solver, verify
from .expansion import build_expansion, build_perturbed
from .expr import ParseError
from .problem import ProblemError

SCHEMA_VERSION = 1

_ERRORS = (ProblemError, ParseError, locator.NoSignChange,
           locator.WrongOrientation, locator.DegenerateRoot,
           kink.PotentialNegative, kink.AnchorOutOfRange,
           corrections.NonDecayingSource, solver.NoConvergence,
           solver.SingularJacobian, verify.AllZeros)


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Deterministic serialization


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    raise TypeError(f"unsupported scalar {x!r}")


def dumps(obj, indent: int = 0) -> str:
    """JSON text with fixed 17-significant-digit float formatting."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  "{k}": {dumps(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}  {dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(obj, (np.floating,)):
        return _fmt(float(obj))
    return _fmt(obj)


def _print_json(payload: dict):
    print(dumps(payload))


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(float(v)) if isinstance(v, (float, np.floating))
                              else str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _rows_payload(header, rows):
    return {"columns": list(header),
            "rows": [[float(v) if isinstance(v, (float, np.floating)) else v
                      for v in row] for row in rows]}


def _report_payload(rep: verify.SweepReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": rep.name,
        "parameter": rep.parameter,
        "values": [list(v) if isinstance(v, (tuple, list)) else v
                   for v in rep.values],
        "measured": list(rep.measured),
        "slope": rep.slope,
        "intercept": rep.intercept,
        "threshold": rep.threshold,
        "passed": rep.passed,
        "details": {k: (list(v) if isinstance(v, tuple) else v)
                    for k, v in rep.details.items()},
    }


# ---------------------------------------------------------------------------
# Shared pipeline


def _pipeline(args):
    spec = problem.resolve_problem(args.problem, getattr(args, "eps", None))
    loc = locator.locate_t0(spec)
    kk = kink.build_kink(spec, loc)
    loc = corrections.compute_matching(spec, kk, loc)
    return spec, loc, kk


def _check_eps(args):
    eps = getattr(args, "eps", None)
    if eps is not None and not 0.0 < eps < 1.0:
        raise UsageError(f"--eps must lie in (0, 1), got {eps}")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_check(args) -> int:
    spec = problem.resolve_problem(args.problem, args.eps)
    report = problem.check_assumptions(spec, n_grid=args.n_grid)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "check",
        "problem": spec.name,
        "epsilon": spec.eps,
        "defaults": {"n_grid": args.n_grid, "p_star": kink.P_STAR,
                     "pprime_star": 0.05, "gamma_margin": 0.01},
        "scale": report.scale,
        "gamma_sq_est": report.gamma_sq_est,
        "checks": {name: {"passed": r.passed, "worst_x": r.worst_x,
                          "worst_value": r.worst_value, "note": r.note}
                   for name, r in report.checks.items()},
        "all_passed": report.all_passed(),
    }
    _print_json(payload)
    return 0 if report.all_passed() else 1


def cmd_locate(args) -> int:
    spec, loc, kk = _pipeline(args)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "locate",
        "problem": spec.name,
        "epsilon": spec.eps,
        "t0": loc.t0, "C_I": loc.C_I, "C_II": loc.C_II, "C_III": loc.C_III,
        "t1": loc.t1, "t2": loc.t2, "tbar1": loc.tbar1,
        "gamma_bar": loc.gamma_bar, "gamma": loc.gamma, "chi0": loc.chi0,
    }
    _print_json(payload)
    return 0


def cmd_dump_kink(args) -> int:
    spec, loc, kk = _pipeline(args)
    rows = list(zip(kk.xi, kk.v_table, kk.chi_table))
    header = ("xi", "V0", "chi")
    if args.format == "json":
        _print_json({"schema_version": SCHEMA_VERSION, "command": "dump-kink",
                     "problem": spec.name, **_rows_payload(header, rows)})
    else:
        _write_csv(args.out, header, rows)
    return 0


def cmd_dump_corrections(args) -> int:
    spec, loc, kk = _pipeline(args)
    aux = corrections.make_auxiliary(spec, kk, loc, p=args.p)
    v1 = corrections.build_v1(aux)
    terms = {"v1": v1, "v2": corrections.build_v2(aux, v1),
             "vstar": corrections.build_vstar(aux),
             "z": corrections.build_z(aux)}
    rows = []
    for label, term in terms.items():
        for xi, val in zip(term.xi_neg, term.val_neg):
            rows.append((label, "minus", float(xi), float(val)))
        for xi, val in zip(term.xi_pos, term.val_pos):
            rows.append((label, "plus", float(xi), float(val)))
    header = ("term", "branch", "xi", "value")
    if args.format == "json":
        _print_json({"schema_version": SCHEMA_VERSION,
                     "command": "dump-corrections", "problem": spec.name,
                     "phi": {k: t.phi_value for k, t in terms.items()},
                     **_rows_payload(header, rows)})
    else:
        _write_csv(args.out, header, rows)
    return 0


def cmd_expand(args) -> int:
    spec, loc, kk = _pipeline(args)
    e = build_expansion(spec, p=args.p, eps=spec.eps, loc=loc, kink=kk)
    pe = build_perturbed(e, pprime=args.pprime, hhat=args.hhat)
    xs = np.linspace(0.0, 1.0, args.points)
    rows = list(zip(xs, np.atleast_1d(e.u_as(xs)),
                    np.atleast_1d(pe.beta(xs)),
                    np.atleast_1d(e.truncated(xs, args.n, args.c_tau))))
    header = ("x", "u_as", "beta", "U_trunc")
    if args.format == "json":
        _print_json({"schema_version": SCHEMA_VERSION, "command": "expand",
                     "problem": spec.name, **_rows_payload(header, rows)})
    else:
        _write_csv(args.out, header, rows)
    return 0


def cmd_residual(args) -> int:
    spec, loc, kk = _pipeline(args)
    rep = verify.residual_sweep(spec, loc, kk)
    _print_json({"command": "residual", **_report_payload(rep)})
    if args.csv:
        _write_csv(args.csv, ("eps", "max_residual"),
                   list(zip(rep.values, rep.measured)))
    return 0 if rep.passed else 1


def cmd_phi(args) -> int:
    spec, loc, kk = _pipeline(args)
    rep = verify.phi_sweep(spec, loc, kk, eps=spec.eps)
    _print_json({"command": "phi", **_report_payload(rep)})
    if args.csv:
        _write_csv(args.csv, ("p", "phi"), list(zip(rep.values, rep.measured)))
    return 0 if rep.passed else 1


def cmd_decay(args) -> int:
    spec, loc, kk = _pipeline(args)
    aux = corrections.make_auxiliary(spec, kk, loc, p=args.p)
    v1 = corrections.build_v1(aux)
    terms = {"v1": v1, "v2": corrections.build_v2(aux, v1),
             "vstar": corrections.build_vstar(aux),
             "z": corrections.build_z(aux)}
    floor = kk.gamma_bar - 0.1
    rates = {"chi": verify.decay_fit(kk.xi, kk.chi_table)}
    for label, term in terms.items():
        rates[label] = verify.term_decay_rate(term)
    passed = all(r >= floor for r in rates.values())
    _print_json({"schema_version": SCHEMA_VERSION, "command": "decay",
                 "problem": spec.name, "gamma_bar": kk.gamma_bar,
                 "floor": floor, "rates": rates, "passed": passed})
    return 0 if passed else 1


def cmd_monotone(args) -> int:
    spec, loc, kk = _pipeline(args)
    eps = spec.eps
    pprime = args.pprime if args.pprime is not None else eps * args.p
    hhat = args.hhat if args.hhat is not None else math.sqrt(eps)
    rep = verify.monotonicity_check(spec, loc, kk, eps=eps, p=args.p,
                                    pprime=pprime, hhat=hhat,
                                    n_points=args.points)
    _print_json({"command": "monotone", **_report_payload(rep)})
    return 0 if rep.passed else 1


def cmd_fbeta(args) -> int:
    spec, loc, kk = _pipeline(args)
    rep = verify.fbeta_check(spec, loc, kk)
    _print_json({"command": "fbeta", **_report_payload(rep)})
    return 0 if rep.passed else 1


def cmd_solve(args) -> int:
    spec, loc, kk = _pipeline(args)
    e = build_expansion(spec, p=0.0, eps=spec.eps, loc=loc, kink=kk)
    mesh = solver.build_mesh(loc, spec.eps, args.n, args.c_tau,
                             kind=args.mesh)
    sol = solver.newton_solve(spec, mesh, lambda x: np.atleast_1d(e.u_as(x)))
    header = ("x", "u")
    rows = list(zip(mesh.nodes, sol.values))
    if args.format == "json":
        _print_json({"schema_version": SCHEMA_VERSION, "command": "solve",
                     "problem": spec.name, "iterations": sol.iterations,
                     "residual_norm": sol.residual_norm,
                     **_rows_payload(header, rows)})
    else:
        _write_csv(args.out, header, rows)
    return 0


def cmd_compare(args) -> int:
    spec, loc, kk = _pipeline(args)
    e = build_expansion(spec, p=0.0, eps=spec.eps, loc=loc, kink=kk)
    mesh = solver.build_mesh(loc, spec.eps, args.n, args.c_tau)
    sol = solver.newton_solve(spec, mesh, lambda x: np.atleast_1d(e.u_as(x)))
    d_max, d_layer, d_outer = solver.compare(sol,
                                             lambda x: np.atleast_1d(e.u_as(x)))
    _print_json({"schema_version": SCHEMA_VERSION, "command": "compare",
                 "problem": spec.name, "epsilon": spec.eps, "N": args.n,
                 "iterations": sol.iterations,
                 "residual_norm": sol.residual_norm,
                 "distance_max": d_max, "distance_layer": d_layer,
                 "distance_outer": d_outer})
    return 0


def cmd_all(args) -> int:
    problems = (args.problem,) if args.problem != "all" else acceptance.PROBLEMS
    for name in problems:
        if name not in problem.BUILTIN_PROBLEMS:
            raise UsageError(
                f"--problem must name a built-in for 'all', got {name!r}")
    results = acceptance.run_all(problems=problems, verbose=True)
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layerforge",
        description="Interior-layer expansions for bistable reaction-"
                    "diffusion boundary value problems.",
        epilog="Environment: LAYERFORGE_THREADS caps sweep parallelism; "
               "LAYERFORGE_NUMBA=0 selects the pure-numpy kernels.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, **extra):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--problem", default="cubic",
                       help="built-in name or path to a JSON problem file")
        p.add_argument("--eps", type=float, default=None,
                       help="override the problem's epsilon")
        p.set_defaults(fn=fn)
        return p

    p = add("check", cmd_check, "verify the structural assumptions")
    p.add_argument("--n-grid", type=int, default=256,
                   help="check-grid resolution (default 256)")

    add("locate", cmd_locate, "layer point and matching constants (JSON)")

    p = add("dump-kink", cmd_dump_kink,
            "profile table as CSV: xi,V0,chi")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = add("dump-corrections", cmd_dump_corrections,
            "correction tables as CSV: term,branch,xi,value")
    p.add_argument("--p", type=float, default=0.0, help="profile shift")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = add("expand", cmd_expand,
            "evaluate expansions on a uniform grid: x,u_as,beta,U_trunc")
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--pprime", type=float, default=0.0)
    p.add_argument("--hhat", type=float, default=0.0)
    p.add_argument("--n", type=int, default=64, help="truncation N")
    p.add_argument("--c-tau", type=float, default=2.5)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = add("residual", cmd_residual, "residual-order sweep report (JSON)")
    p.add_argument("--csv", default=None, help="write raw points to CSV")

    p = add("phi", cmd_phi, "jump-functional linearity report (JSON)")
    p.add_argument("--csv", default=None, help="write raw points to CSV")

    p = add("decay", cmd_decay, "tail decay-rate report (JSON)")
    p.add_argument("--p", type=float, default=0.0)

    p = add("monotone", cmd_monotone, "bracketing-order report (JSON)")
    p.add_argument("--p", type=float, default=0.01)
    p.add_argument("--pprime", type=float, default=None,
                   help="default eps * p")
    p.add_argument("--hhat", type=float, default=None,
                   help="default sqrt(eps)")
    p.add_argument("--points", type=int, default=1000)

    add("fbeta", cmd_fbeta, "operator-defect margin report (JSON)")

    p = add("solve", cmd_solve, "nonlinear FD solve seeded by the expansion")
    p.add_argument("--n", type=int, default=512, help="mesh cells (even)")
    p.add_argument("--c-tau", type=float, default=2.5)
    p.add_argument("--mesh", choices=("layer-adapted", "uniform"),
                   default="layer-adapted")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = add("compare", cmd_compare, "distance of the FD solve to the expansion")
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--c-tau", type=float, default=2.5)

    add("all", cmd_all, "run the acceptance suite (use --problem all for "
                        "every built-in)")

    return parser


def _validate(args):
    _check_eps(args)
    if getattr(args, "n", None) is not None:
        if args.command in ("solve", "compare") and args.n % 2:
            raise UsageError(f"--n must be even, got {args.n}")
    if getattr(args, "c_tau", None) is not None and args.c_tau <= 2.0:
        raise UsageError(f"--c-tau must exceed 2, got {args.c_tau}")
    if getattr(args, "p", None) is not None and abs(args.p) > kink.P_STAR:
        raise UsageError(f"--p magnitude must not exceed {kink.P_STAR}")
    if getattr(args, "points", None) is not None and args.points < 2:
        raise UsageError(f"--points must be at least 2, got {args.points}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # downstream consumer (head, etc.) closed the stream
        try:
            sys.stdout.close()
        except OSError:
            pass
        return 0
    except _ERRORS as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
