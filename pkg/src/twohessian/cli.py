"""Command-line entry point: ``twohessian {solve,study,dirs,validate}``.

Settings come from built-in defaults, then an optional INI file (``--config``,
section ``[run]``), then command-line flags. The exit status is 1 if any
solve, study row or validation fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .directions import estimate_dtheta, export_directions_csv, generate_directions
from .grid import export_field_binary, export_field_csv
from .harness import RunConfig, export_level_sets, load_config, run_study
from .problems import catalog, get_problem, validate_problem
from .solvers import METHODS, SolverError, solve


def _csv_ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _csv_floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _csv_strs(text):
    return tuple(text.replace(",", " ").split())


def _add_run_flags(p: argparse.ArgumentParser, study: bool) -> None:
    p.add_argument("--config", type=Path, help="INI file with a [run] section")
    p.add_argument("--problem", help="problem name, ex1 .. ex8")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--init", choices=("exact_plus_noise", "jacobi_warmstart", "poisson_sqrt2f", "zero"))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--alpha-coeff", type=float, dest="parabolic_alpha_coeff",
                   help="parabolic step is this times h^4")
    p.add_argument("--out", dest="out_dir", help="output directory")
    p.add_argument("--levels", type=_csv_floats, help="level values for level-set export")
    if study:
        p.add_argument("--schemes", type=_csv_strs, help="naive and/or monotone, comma separated")
        p.add_argument("--n-thetas", type=_csv_ints, dest="n_thetas")
        p.add_argument("--ns", type=_csv_ints, help="grid sizes, e.g. 15,20,25")
        p.add_argument("--history", action="store_const", const=True, dest="export_history",
                       help="write residual histories as JSON")
        p.add_argument("--level-sets", action="store_const", const=True, dest="export_level_sets")
    else:
        p.add_argument("--scheme", choices=("naive", "monotone"))
        p.add_argument("--n-theta", type=int, dest="n_theta")
        p.add_argument("-n", "--n", type=int, dest="n", help="nodes per axis")
        p.add_argument("--export-field", action="store_const", const=True, dest="export_field",
                       help="write the solution as CSV and raw float64")


_RUN_KEYS = ("problem", "method", "init", "tol", "max_iters", "seed", "noise",
             "parabolic_alpha_coeff", "out_dir", "levels", "schemes", "n_thetas", "ns",
             "export_history", "export_level_sets", "export_field")


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    kw = {k: getattr(args, k) for k in _RUN_KEYS if hasattr(args, k)}
    if getattr(args, "scheme", None):
        kw["schemes"] = (args.scheme,)
    if getattr(args, "n_theta", None):
        kw["n_thetas"] = (args.n_theta,)
    if getattr(args, "n", None):
        kw["ns"] = (args.n,)
    return cfg.override(**kw)


def cmd_solve(args) -> int:
    cfg = _run_config(args)
    label, scheme, nt = cfg.columns()[0]
    n = cfg.ns[0]
    problem = get_problem(cfg.problem)
    try:
        rep = solve(problem, n, cfg.solver_config(scheme, nt))
    except (SolverError, ValueError) as exc:
        print(f"{problem.name} {label} N={n}: error: {exc}", file=sys.stderr)
        return 1
    err = "-" if rep.error_inf is None else f"{rep.error_inf:.3e}"
    print(f"{problem.name} {label} {cfg.method} N={n}: {rep.status} after {rep.iterations} iterations, "
          f"residual {rep.residual_history[-1]:.3e}, error {err}, {rep.timing:.2f}s")
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"{problem.name}_{label.replace('(', '').replace(')', '')}_N{n}"
        (out / f"report_{stem}.json").write_text(rep.to_json(indent=1))
        if cfg.export_field:
            export_field_csv(rep.final_field, out / f"field_{stem}.csv")
            export_field_binary(rep.final_field, out / f"field_{stem}.f8")
        if cfg.levels:
            export_level_sets(rep.final_field, cfg.levels, out / f"levels_{stem}.csv")
    return 0 if rep.converged else 1


def cmd_study(args) -> int:
    cfg = _run_config(args)
    table = run_study(cfg)
    print(table.format())
    failed = table.failed
    if failed:
        print(f"{len(failed)} failed rows: {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_dirs(args) -> int:
    for nt in args.n_theta:
        dirs = generate_directions(nt)
        line = f"n_theta={nt}: {len(dirs.directions)} directions, {len(dirs.triplets)} triplets"
        if args.dtheta:
            line += f", dtheta~{estimate_dtheta(dirs, samples=args.dtheta, seed=0):.4f}"
        print(line)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            export_directions_csv(dirs, out / f"directions_{nt}.csv")
    return 0


def cmd_validate(args) -> int:
    problems = catalog() if args.problem in (None, "all") else [get_problem(args.problem)]
    status = 0
    results = []
    for p in problems:
        if p.u_exact is None:
            print(f"{p.name}: no exact solution, skipped")
            continue
        r = validate_problem(p, samples=args.samples, tol=args.tol, seed=args.seed)
        results.append(r.__dict__)
        tag = "ok" if r.passed else "FAIL"
        print(f"{p.name}: {tag} max relative residual {r.max_residual:.2e} over {r.samples} points, "
              f"admissible fraction {r.admissible_fraction:.3f}")
        status |= not r.passed
    if args.json:
        print(json.dumps(results, default=float, indent=1))
    return int(status)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twohessian", description="Solve the 3D Dirichlet 2-Hessian equation.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one solve on one grid")
    _add_run_flags(p, study=False)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("study", help="convergence study over grid sizes and schemes")
    _add_run_flags(p, study=True)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("dirs", help="print or dump lattice direction sets")
    p.add_argument("--n-theta", type=_csv_ints, default=(1, 2, 3), dest="n_theta")
    p.add_argument("--out", help="directory for directions_<n_theta>.csv")
    p.add_argument("--dtheta", type=int, default=0, metavar="SAMPLES",
                   help="also estimate the directional resolution from this many random frames")
    p.set_defaults(func=cmd_dirs)

    p = sub.add_parser("validate", help="check f against the analytic 2-Hessian of u")
    p.add_argument("--problem", default="all")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
