"""Command-line interface.

Subcommands
    estimate    solve for the scatter of a dataset of subspaces
    diagnose    existence trichotomy for a dataset
    lln         consistency experiment (error vs sample size)
    clt         fluctuation experiment against the predicted covariance
    gradcheck   finite-difference validation of the exact derivatives

Exit codes: 0 success (estimate found / verdict "unique" / experiment done),
1 boundary case (verdict "limit"), 2 no estimate (verdict "no_ge", diverging
run, deficient span, degenerate limit law), 3 input or I/O problem,
4 inconclusive (verdict "inconclusive", iteration budget exhausted, failed
gradcheck).

Every run writes ``replay.json`` (the resolved options plus library
versions) into the output directory so results can be reproduced exactly.
The worker count comes from --threads, else the GRASSMANN_SCATTER_THREADS
environment variable, else 1.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .asymptotics import clt_experiment, lln_experiment
from .diagnostics import classify_existence, unique_sample_threshold
from .errors import DegeneracyError, DomainError, ExistenceError, UsageError
from .estimator import SolverOptions, fixed_point_solve, riemannian_descent
from .grassmann import Empirical, busemann, distinguished_ray_direction
from .io import read_measure_json, read_scatter_csv, write_matrix_csv, write_report_json
from .likelihood import (
    covariant_deriv_grad,
    grad_norm_sq,
    grad_norm_sq_grad,
    grad_point,
    loglik_point,
)
from .manifold import geodesic, inner, random_scatter, random_unit_tangent

LOW_POWER_REPS = {"lln": 50, "clt": 500}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _package_version() -> str:
    try:
        return version("grassmann-scatter")
    except PackageNotFoundError:
        return "unknown"


def _resolve_threads(value) -> int:
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("GRASSMANN_SCATTER_THREADS")
    if env is None:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        raise UsageError(f"GRASSMANN_SCATTER_THREADS={env!r} is not an integer")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_replay(outdir: Path, args) -> None:
    opts = {k: v for k, v in vars(args).items() if k != "func"}
    for k, v in opts.items():
        if isinstance(v, Path):
            opts[k] = str(v)
    doc = {
        "command": args.command,
        "options": opts,
        "package_version": _package_version(),
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
    }
    with open(outdir / "replay.json", "w") as fh:
        json.dump(doc, fh, indent=2)


def _solver_options(args) -> SolverOptions:
    return SolverOptions(max_iter=args.max_iter, tol=args.tol, damping=args.damping)


def _flag_jsonable(flag):
    if flag is None:
        return None
    return [
        {"alpha": float(a), "dim": int(B.shape[1]), "basis": B.tolist()}
        for a, B in flag.pairs
    ]


def _cmd_estimate(args) -> int:
    meas = read_measure_json(args.input)
    start = read_scatter_csv(args.start) if args.start else None
    opts = _solver_options(args)
    outdir = _outdir(args)
    _write_replay(outdir, args)
    try:
        if args.solver == "descent":
            result = riemannian_descent(meas, Sigma0=start, options=opts)
        else:
            result = fixed_point_solve(meas, Sigma0=start, options=opts)
    except ExistenceError as exc:
        report = {
            "status": "no_ge",
            "reason": str(exc),
            "witness": None if exc.witness is None else exc.witness.tolist(),
            "m": meas.m,
            "r": meas.r,
            "n": meas.n,
        }
        write_report_json(outdir / "report.json", report)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_matrix_csv(outdir / "estimate.csv", result.estimate)
    report = {
        "status": result.status,
        "residual": result.residual,
        "iterations": result.iterations,
        "m": meas.m,
        "r": meas.r,
        "n": meas.n,
        "trace": [[int(k), float(res), float(d)] for k, res, d in result.trace],
        "boundary": _flag_jsonable(result.boundary),
    }
    write_report_json(outdir / "report.json", report)
    print(
        f"{result.status}: residual {result.residual:.3e} "
        f"after {result.iterations} iterations -> {outdir / 'estimate.csv'}"
    )
    return {"converged": 0, "diverged_to_boundary": 2}.get(result.status, 4)


def _cmd_diagnose(args) -> int:
    meas = read_measure_json(args.input)
    report = classify_existence(meas, tol=args.tol, max_subset=args.max_subset, cap=args.cap)
    outdir = _outdir(args)
    _write_replay(outdir, args)
    doc = {
        "verdict": report.verdict,
        "min_index": report.min_index,
        "witness": None
        if report.witness is None
        else {
            "dim": report.witness.dim,
            "provenance": report.witness.provenance,
            "basis": report.witness.basis.tolist(),
        },
        "zeros": [{"dim": c.dim, "provenance": c.provenance} for c in report.zeros],
        "complement_ok": report.complement_ok,
        "scanned": report.scanned,
        "truncated": report.truncated,
        "n": meas.n,
        "unique_sample_threshold": unique_sample_threshold(meas.m, meas.r),
    }
    write_report_json(outdir / "report.json", doc)
    print(f"{report.verdict}: min index {report.min_index:.3e} over {report.scanned} subspaces")
    return {"unique": 0, "limit": 1, "no_ge": 2}.get(report.verdict, 4)


def _sigma_for_experiment(args) -> np.ndarray:
    if args.sigma:
        return read_scatter_csv(args.sigma)
    if args.m is None:
        raise UsageError("either --sigma or --m is required")
    return np.eye(args.m)


def _cmd_lln(args) -> int:
    sigma = _sigma_for_experiment(args)
    threads = _resolve_threads(args.threads)
    report = lln_experiment(
        sigma, args.r, args.ns, args.reps, args.seed,
        threads=threads, options=_solver_options(args),
    )
    outdir = _outdir(args)
    _write_replay(outdir, args)
    warnings = []
    if args.reps < LOW_POWER_REPS["lln"]:
        warnings.append(f"LOW_POWER: {args.reps} replications (need {LOW_POWER_REPS['lln']}+)")
    if any(b >= a for a, b in zip(report.medians, report.medians[1:])):
        warnings.append("WARN: median distances are not strictly decreasing across sample sizes")
    doc = {
        "ns": report.ns,
        "reps": report.reps,
        "seed": report.seed,
        "medians": report.medians,
        "quartiles": report.quartiles,
        "slope": report.slope,
        "threads": threads,
        "warnings": warnings,
    }
    write_report_json(outdir / "lln.json", doc)
    # one row per replicate, one column per sample size
    write_matrix_csv(outdir / "distances.csv", report.distances.T)
    for n, med in zip(report.ns, report.medians):
        print(f"n = {n:6d}   median distance = {med:.6f}")
    print(f"log-log slope: {report.slope:.4f}")
    return 0


def _cmd_clt(args) -> int:
    sigma = _sigma_for_experiment(args)
    threads = _resolve_threads(args.threads)
    report = clt_experiment(
        sigma, args.r, args.n, args.reps, args.seed,
        threads=threads, options=_solver_options(args), ref_mc_n=args.ref_mc,
    )
    outdir = _outdir(args)
    _write_replay(outdir, args)
    warnings = []
    if args.reps < LOW_POWER_REPS["clt"]:
        warnings.append(f"LOW_POWER: {args.reps} replications (need {LOW_POWER_REPS['clt']}+)")
    doc = {
        "n": report.n,
        "reps": report.reps,
        "seed": report.seed,
        "annihilation": report.annihilation,
        "rel_frobenius": report.rel_frobenius,
        "max_skew": report.max_skew,
        "threads": threads,
        "warnings": warnings,
    }
    write_report_json(outdir / "clt.json", doc)
    write_matrix_csv(outdir / "cov.csv", report.cov)
    write_matrix_csv(outdir / "ref.csv", report.ref)
    print(
        f"annihilation {report.annihilation:.4f}   "
        f"rel. Frobenius error {report.rel_frobenius:.4f}   "
        f"max |skew| {report.max_skew:.4f}"
    )
    return 0


GRADCHECK_TOLS = {
    "first_order": 1e-6,
    "second_order": 1e-5,
    "norm_gradient": 1e-5,
    "ray_normalization": 1e-8,
}


def _cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    ranks = [args.r] if args.r is not None else list(range(1, args.m))
    rows = []
    worst = dict.fromkeys(GRADCHECK_TOLS, 0.0)
    h1, h2 = 1e-5, 1e-3
    for r in ranks:
        # The distinguished-ray check is deterministic per (m, r): along the
        # ray from the identity the horofunction must decrease at unit rate.
        A = distinguished_ray_direction(args.m, r)
        U0 = np.eye(args.m)[:, :r]
        e4 = max(
            abs(busemann(U0, geodesic(np.eye(args.m), A, t)) + t)
            for t in (-2.0, -0.5, 0.5, 2.0)
        )
        worst["ray_normalization"] = max(worst["ray_normalization"], e4)
        for _ in range(args.trials):
            Sigma = random_scatter(args.m, rng)
            X = rng.standard_normal((args.m, r))
            W = random_unit_tangent(Sigma, rng)

            def f(t):
                return loglik_point(X, geodesic(Sigma, W, t))

            d1 = inner(Sigma, grad_point(X, Sigma), W)
            d1_fd = (f(h1) - f(-h1)) / (2.0 * h1)
            d2 = inner(Sigma, covariant_deriv_grad(X, Sigma, W), W)
            d2_fd = (f(h2) - 2.0 * f(0.0) + f(-h2)) / h2**2

            meas = Empirical(rng.standard_normal((args.m * r + 3, args.m, r)))
            Gamma = random_scatter(args.m, rng)
            V = random_unit_tangent(Gamma, rng)

            def h(t):
                return grad_norm_sq(meas, geodesic(Gamma, V, t))

            d3 = inner(Gamma, grad_norm_sq_grad(meas, Gamma), V)
            d3_fd = (h(h1) - h(-h1)) / (2.0 * h1)

            e1 = abs(d1_fd - d1) / max(1.0, abs(d1))
            e2 = abs(d2_fd - d2) / max(1.0, abs(d2))
            e3 = abs(d3_fd - d3) / max(1.0, abs(d3))
            worst["first_order"] = max(worst["first_order"], e1)
            worst["second_order"] = max(worst["second_order"], e2)
            worst["norm_gradient"] = max(worst["norm_gradient"], e3)
            rows.append(
                {"r": r, "first_order": e1, "second_order": e2, "norm_gradient": e3}
            )
    ok = all(worst[key] <= tol for key, tol in GRADCHECK_TOLS.items())
    outdir = _outdir(args)
    _write_replay(outdir, args)
    write_report_json(
        outdir / "gradcheck.json",
        {
            "m": args.m,
            "trials": args.trials,
            "max_errors": worst,
            "tolerances": GRADCHECK_TOLS,
            "passed": ok,
            "rows": rows,
        },
    )
    for key in GRADCHECK_TOLS:
        print(f"max {key.replace('_', ' ')} error {worst[key]:.3e} (tol {GRADCHECK_TOLS[key]:g})")
    print("ok" if ok else "FAILED")
    return 0 if ok else 4


def _add_solver_flags(p) -> None:
    p.add_argument("--tol", type=float, default=1e-12, help="residual tolerance")
    p.add_argument("--max-iter", type=int, default=500, help="iteration budget")
    p.add_argument("--damping", type=float, default=1.0, help="step fraction in (0, 1]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grassmann-scatter", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="solve for the scatter of a dataset")
    p.add_argument("--input", required=True, help="dataset JSON ({m, r, points[, weights]})")
    p.add_argument("--start", default=None, help="starting scatter CSV (default: identity)")
    p.add_argument("--solver", choices=["fixed-point", "descent"], default="fixed-point")
    _add_solver_flags(p)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("diagnose", help="existence trichotomy for a dataset")
    p.add_argument("--input", required=True, help="dataset JSON")
    p.add_argument("--tol", type=float, default=1e-9, help="index zero-tolerance")
    p.add_argument("--max-subset", type=int, default=2, help="largest atom subset to span")
    p.add_argument("--cap", type=int, default=512, help="candidate pool cap")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("lln", help="consistency experiment")
    p.add_argument("--m", type=int, default=None, help="ambient dimension (or use --sigma)")
    p.add_argument("--r", type=int, required=True, help="subspace dimension")
    p.add_argument("--sigma", default=None, help="true scatter CSV (default: identity)")
    p.add_argument(
        "--ns", type=lambda s: [int(x) for x in s.split(",")],
        default=[25, 100, 400, 1600], help="comma-separated sample sizes",
    )
    p.add_argument("--reps", type=int, default=200, help="replications per sample size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="workers (default: GRASSMANN_SCATTER_THREADS or 1)")
    _add_solver_flags(p)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_lln)

    p = sub.add_parser("clt", help="fluctuation experiment")
    p.add_argument("--m", type=int, default=None, help="ambient dimension (or use --sigma)")
    p.add_argument("--r", type=int, required=True, help="subspace dimension")
    p.add_argument("--sigma", default=None, help="true scatter CSV (default: identity)")
    p.add_argument("--n", type=int, default=2000, help="sample size per replication")
    p.add_argument("--reps", type=int, default=4000, help="replications")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ref-mc", type=int, default=200_000,
                   help="Monte Carlo draws for the predicted covariance")
    p.add_argument("--threads", type=int, default=None,
                   help="workers (default: GRASSMANN_SCATTER_THREADS or 1)")
    _add_solver_flags(p)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_clt)

    p = sub.add_parser("gradcheck", help="finite-difference derivative validation")
    p.add_argument("--m", type=int, required=True, help="ambient dimension")
    p.add_argument("--r", type=int, default=None, help="subspace dimension (default: all)")
    p.add_argument("--trials", type=int, default=20, help="random instances per rank")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ExistenceError, DegeneracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, DomainError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
