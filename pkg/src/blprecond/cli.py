"""Command-line entry point: ``blprecond {table1d,table2d,verify,dump-matrix}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .discretize import assemble_upwind_1d, assemble_upwind_2d, write_matrix_market
from .experiments import Case, ExperimentSpec, format_csv, run_table, run_verification
from .mesh import build_shishkin_1d, build_shishkin_2d, partition_regions
from .mgcorner import dump_stencils
from .precond2d import build_block_preconditioner
from .problem import example_1d, manufactured_case

EXIT_OK, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2


def _common(p: argparse.ArgumentParser, case_choices: list[str] | None, default_case: str | None) -> None:
    p.add_argument("--eps", type=float, nargs="+", default=[], help="perturbation parameters")
    p.add_argument("--n", type=int, nargs="+", default=[], help="interval counts per axis")
    if case_choices:
        p.add_argument("--case", choices=case_choices, default=default_case)
    p.add_argument("--sigma", type=float, default=2.5, help="transition-point constant (2D)")
    p.add_argument("--out", type=Path, default=None, help="output file (stdout if omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=200)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blprecond",
                                     description="Boundary-layer preconditioners on Shishkin meshes")
    sub = parser.add_subparsers(dest="command", required=True)

    t1 = sub.add_parser("table1d", help="1D benchmark errors and GMRES iterations as CSV")
    _common(t1, None, None)
    t1.add_argument("--k-const", type=float, default=1.0, help="K in the K ln(N)/N stopping rule")

    t2 = sub.add_parser("table2d", help="2D manufactured-solution errors and FGMRES iterations as CSV")
    _common(t2, ["parabolic", "exponential"], "parabolic")

    v = sub.add_parser("verify", help="spectral, splitting and Galerkin checks")
    _common(v, ["1d", "parabolic", "exponential"], "1d")
    v.add_argument("--corrupt", action="store_true", help="damage a kept entry (negative control)")

    d = sub.add_parser("dump-matrix", help="write an assembled operator in MatrixMarket format")
    _common(d, ["1d", "parabolic", "exponential"], "1d")
    d.add_argument("--stencils", type=Path, default=None,
                   help="also write the corner multigrid stencils (2D) to this CSV file")
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _table(args, case: Case) -> int:
    spec = ExperimentSpec(case, args.eps, args.n, getattr(args, "k_const", 1.0), args.sigma,
                          args.max_iters, None, args.seed)
    rows = run_table(spec)
    _emit(format_csv(rows), args.out)
    for r in rows:
        if not r.converged:
            print(f"solver failure: {r.case.value} eps={r.eps:g} N={r.N} {r.message}", file=sys.stderr)
    return EXIT_OK if all(r.converged for r in rows) else EXIT_SOLVER


def _verify(args) -> int:
    spec = ExperimentSpec(Case(args.case), args.eps, args.n, sigma=args.sigma, max_iters=args.max_iters,
                          seed=args.seed)
    report = run_verification(spec, corrupt=args.corrupt)
    _emit("".join(line + "\n" for line in report.lines()), args.out)
    return report.exit_code


def _dump(args) -> int:
    if len(args.eps) != 1 or len(args.n) != 1:
        raise SystemExit("dump-matrix takes exactly one --eps and one --n")
    if args.out is None:
        raise SystemExit("dump-matrix needs --out")
    eps, N = args.eps[0], args.n[0]
    case = Case(args.case)
    if case is Case.ONE_D:
        problem = example_1d(eps)
        A, _ = assemble_upwind_1d(build_shishkin_1d(eps, N, problem.c_lower), problem, eps)
        write_matrix_market(args.out, A)
        return EXIT_OK
    pr = manufactured_case(case.layer_case, eps).problem
    mesh = build_shishkin_2d(eps, N, case.layer_case, pr.c1_lower, pr.c2_lower, args.sigma)
    part = partition_regions(mesh)
    A, _ = assemble_upwind_2d(mesh, pr, eps, part)
    write_matrix_market(args.out, A)
    if args.stencils is not None:
        P = build_block_preconditioner(A, part, mesh, pr, eps)
        dump_stencils(P.corner, args.stencils)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "table1d":
            return _table(args, Case.ONE_D)
        if args.command == "table2d":
            return _table(args, Case(args.case))
        if args.command == "verify":
            return _verify(args)
        return _dump(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
