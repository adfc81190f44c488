"""Command-line front end: ``arrabit solve|verify|gen``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict

import numpy as np

from . import analysis
from .driver import SUCCESS, IterationRecord, SolveResult, SolverConfig, solve
from .generators import PROFILES, make_profile, spectrum
from .sparsemat import load_matrix_market, set_threads, write_matrix_market

SCHEMA_VERSION = 1
HISTORY_COLUMNS = ("outer", "maxres", "spmv", "rr", "p", "d", "locked", "seconds")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

log = logging.getLogger("arrabit")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 rather than argparse's 2, which is
    reserved for non-convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    d = SolverConfig(k=1)
    p.add_argument("--k", type=int, required=True, help="number of eigenpairs")
    p.add_argument("--which", choices=("largest", "smallest"), default=d.which)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--q", type=int, default=None, help="guard vectors (default round(0.1k))")
    p.add_argument("--p", type=int, default=d.p, help="initial augmentation depth")
    p.add_argument("--p-max", type=int, default=d.p_max)
    p.add_argument("--d", type=int, default=d.d, help="initial filter degree")
    p.add_argument("--d-max", type=int, default=d.d_max)
    p.add_argument("--maxit", type=int, default=d.maxit)
    p.add_argument("--maxit1", type=int, default=d.maxit1)
    p.add_argument("--maxit2", type=int, default=d.maxit2)
    p.add_argument("--inner", choices=("mpm", "gn"), default=d.inner)
    p.add_argument("--filter", default=d.filter,
                   choices=("interpolant", "classic", "classic-chebyshev"))
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--tol1", type=float, default=None, help="initial continuation tolerance")
    p.add_argument("--b-update", choices=("every", "continuation"), default=d.b_update,
                   help="when the filter's upper endpoint follows the Ritz values")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="arrabit", description="Sparse symmetric eigensolver.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="log progress to stderr (-vv for debug)")
    parser.add_argument("--threads", type=int, default=None,
                        help="kernel threads; 0 = sequential (bit-exact). "
                             "Falls back to ARRABIT_THREADS")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ps = sub.add_parser("solve", help="compute exterior eigenpairs of a Matrix Market file")
    ps.add_argument("--matrix", required=True, help="Matrix Market file (real symmetric)")
    _add_solver_flags(ps)
    ps.add_argument("--out", default=None, help="JSON result file (default stdout)")
    ps.add_argument("--history", default=None, help="per-iteration CSV file")
    ps.add_argument("--vectors", default=None, help="save eigenvectors as .npy")
    ps.add_argument("--omit-timing", action="store_true",
                    help="leave wall-clock fields out of the JSON (reproducible output)")

    pv = sub.add_parser("verify", help="run the bound sweeps and the filter comparison")
    pv.add_argument("--seeds", type=int, default=30)
    pv.add_argument("--n", type=int, default=60, help="largest instance size (<= 1000)")
    pv.add_argument("--degree", type=int, default=8, help="interpolant degree in the power sweep")
    pv.add_argument("--out", default=None)
    pv.add_argument("--no-compare", action="store_true", help="skip the filter comparison")
    pv.add_argument("--compare-n", type=int, default=400)
    pv.add_argument("--compare-k", type=int, default=20)
    pv.add_argument("--compare-inner", choices=("mpm", "gn"), default="mpm")
    pv.add_argument("--full", action="store_true", help="include per-instance reports")

    pg = sub.add_parser("gen", help="write a synthetic test matrix")
    pg.add_argument("--profile", required=True, choices=PROFILES)
    pg.add_argument("--n", type=int, required=True)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--gap", type=float, default=None, help="eigenvalue ratio for flat/geometric")
    pg.add_argument("--step", type=float, default=5e-4, help="spacing for the linear profile")
    pg.add_argument("--density", type=float, default=0.05, help="fill for the random profile")
    pg.add_argument("--out", required=True)
    return parser


def _config(args) -> SolverConfig:
    kind = "classic-chebyshev" if args.filter == "classic" else args.filter
    return SolverConfig(
        k=args.k, which=args.which, tol=args.tol, q=args.q, p=args.p, p_max=args.p_max,
        d=args.d, d_max=args.d_max, maxit=args.maxit, maxit1=args.maxit1,
        maxit2=args.maxit2, inner=args.inner, filter=kind, seed=args.seed,
        tol1=args.tol1, b_update=args.b_update,
    )


def _record(rec: IterationRecord, timing: bool) -> dict:
    out = asdict(rec)
    if not timing:
        del out["seconds"]
    return out


def run_result(res: SolveResult, matrix: dict, timing: bool = True) -> dict:
    """JSON-ready summary of a solve."""
    out = {
        "schema_version": SCHEMA_VERSION,
        "matrix": matrix,
        "config": asdict(res.config),
        "status": res.status,
        "converged": res.converged,
        "eigenvalues": [float(v) for v in res.values],
        "residuals": [float(r) for r in res.residuals],
        "maxres": float(res.maxres),
        "locked": int(res.locked_values.size),
        "spmv_count": int(res.spmv_count),
        "rr_calls": int(res.rr_calls),
        "outer_iterations": res.outer_iterations,
        "history": [_record(r, timing) for r in res.history],
    }
    if timing:
        out["seconds"] = float(res.seconds)
    return out


def _write_json(obj, path) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def write_history(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for r in history:
            w.writerow([r.outer, repr(float(r.maxres)), r.spmv, r.rr, r.p, r.d, r.locked,
                        f"{r.seconds:.6f}"])


def cmd_solve(args) -> int:
    A = load_matrix_market(args.matrix)
    cfg = _config(args)
    cfg.validate(A.n)

    def progress(rec: IterationRecord) -> None:
        log.info("outer %d  maxres %.3e  spmv %d  p %d  d %d  locked %d",
                 rec.outer, rec.maxres, rec.spmv, rec.p, rec.d, rec.locked)

    res = solve(A, cfg, callback=progress)
    matrix = {"path": str(args.matrix), "n": A.n, "nnz": A.nnz}
    _write_json(run_result(res, matrix, timing=not args.omit_timing), args.out)
    if args.history:
        write_history(args.history, res.history)
    if args.vectors:
        np.save(args.vectors, res.vectors)
    log.info("status %s, maxres %.3e", res.status, res.maxres)
    return EXIT_OK if res.status in SUCCESS else EXIT_NOT_CONVERGED


def verify_report(seeds: int, n: int, degree: int = 8, compare: dict | None = None,
                  full: bool = False) -> dict:
    """Bound sweeps plus (optionally) the filter comparison, as one JSON-ready dict."""
    if n > analysis.MAX_ORACLE_N:
        raise ValueError(f"--n must be <= {analysis.MAX_ORACLE_N} (dense oracle limit), got {n}")
    if seeds < 1:
        raise ValueError("--seeds must be >= 1")
    thm = analysis.theorem_sweep(seeds, n)
    pw = analysis.power_sweep(seeds, n, degree)
    if not full:
        for sweep in (thm, pw):
            sweep["reports"] = [r for r in sweep["reports"] if not r["passed"]]
    out = {
        "schema_version": SCHEMA_VERSION,
        "seeds": seeds,
        "n_max": n,
        "theorem_bound": thm,
        "power_bound": pw,
        "failures": thm["failures"] + pw["failures"],
    }
    if compare is not None:
        out["filter_comparison"] = analysis.filter_comparison(**compare)
    return out


def cmd_verify(args) -> int:
    compare = None
    if not args.no_compare:
        compare = {"n": args.compare_n, "k": args.compare_k, "inner": args.compare_inner}
    report = verify_report(args.seeds, args.n, args.degree, compare, args.full)
    _write_json(report, args.out)
    log.info("%d failure(s)", report["failures"])
    return EXIT_OK if report["failures"] == 0 else EXIT_NOT_CONVERGED


def cmd_gen(args) -> int:
    A = make_profile(args.profile, args.n, seed=args.seed, gap=args.gap,
                     density=args.density, step=args.step)
    note = f"arrabit gen --profile {args.profile} --n {args.n} --seed {args.seed}"
    if args.profile not in ("diag", "random"):
        lam = spectrum(args.profile, args.n, gap=args.gap, step=args.step)
        note += f" (eigenvalues {lam[0]:.6g} .. {lam[-1]:.6g})"
    write_matrix_market(args.out, A, comment=note)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "gen": cmd_gen}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("numba").setLevel(logging.WARNING)
    try:
        if args.threads is not None:
            set_threads(args.threads)
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"arrabit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
