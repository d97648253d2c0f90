"""Command line interface: ``isolearn {gen,solve,compare,sweep,interp}``.

Exit codes: 0 success, 1 comparison above tolerance, 2 usage error or
degenerate (information-incomplete) data, 3 solver did not converge.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import experiments as ex
from .io import (
    SampleFormatError,
    format_float,
    model_from_report,
    read_matrix,
    read_model,
    read_sample,
    write_matrix,
    write_model,
    write_sample,
)
from .linalg import DegenerateMatrixError
from .model import ObservationSample, SolverConfig

log = logging.getLogger("isolearn")

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3

SCALAR_FUNCTIONS = {
    "x": lambda x: x,
    "x2": lambda x: x**2,
    "sin": lambda x: np.sin(np.pi * x),
    "abs": np.abs,
}


class UsageError(Exception):
    pass


def _floats(text, count=None, what="values"):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"expected {count} comma-separated {what}, got {len(vals)}")
    return vals


def _unit(v):
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if not norm > 0:
        raise UsageError("initial vector must be nonzero")
    return v / norm


def cmd_gen(args):
    if args.kind == "euler3":
        u = ex.euler_rotation(*_floats(args.angles, 3, "angles"))
        x0 = ex.SO3_START if args.x0 is None else _unit(_floats(args.x0, 3, "components"))
        sample = ex.generate_trajectory(u, x0, args.steps, args.seed, args.flips)
    elif args.kind == "orth":
        if args.dim is None:
            raise UsageError("gen orth needs --dim")
        u = ex.random_orthogonal(args.dim, args.seed)
        x0 = _unit(np.random.default_rng(args.seed + 1).standard_normal(args.dim))
        sample = ex.generate_trajectory(u, x0, args.steps, args.seed, args.flips)
    elif args.kind == "poly":
        if args.n is None or args.d is None:
            raise UsageError("gen poly needs --n and --d")
        u = ex.legendre_over_chebyshev(args.d, args.n)
        sample = ex.generate_poly_sample(args.n, args.d, args.points, args.seed, args.flips)
    else:
        x, f = ex.scalar_sample(SCALAR_FUNCTIONS[args.func], args.points, seed=args.seed)
        u = None
        sample = ObservationSample(np.ones(x.size), x[:, None], f[:, None])
    write_sample(args.out, sample)
    if args.matrix_out:
        if u is None:
            raise UsageError("--matrix-out is not available for scalar samples")
        write_matrix(args.matrix_out, u)
    print(f"wrote {sample.size} rows (n={sample.n}, D={sample.D}, seed={args.seed}) to {args.out}")
    return EXIT_OK


def _print_trace(report):
    print(f"{'run':>3} {'iter':>4} {'mu':>24} {'F':>24} {'sum 1/lambda_G':>24}")
    for r in report.runs:
        for h in r.history:
            print(f"{r.rank:>3} {h.iteration:>4} {h.mu:>24.16e} {h.fidelity:>24.16e} {h.penalty:>24.16e}")
        print(f"{r.rank:>3} status={r.status} F={r.fidelity:.16e}")


def cmd_solve(args):
    sample = read_sample(args.input)
    n = sample.n if args.n is None else args.n
    D = sample.D if args.d is None else args.d
    if not (1 <= D <= n and n <= sample.n and D <= sample.D):
        raise UsageError(f"need 1 <= d <= n with n <= {sample.n} and d <= {sample.D}; got n={n}, d={D}")
    config = SolverConfig(
        max_iterations=args.max_iters,
        eigenstate_rank=args.rank,
        num_runs=args.runs,
        channel=args.channel,
        seed=args.seed,
    )
    sub = sample.select(n, D)
    u, report, _ = ex.solve_sample(sub, args.channel, config)
    if args.trace:
        _print_trace(report)
    write_model(args.out, model_from_report(u, report, args.channel))
    state = "converged" if report.converged else "NOT converged"
    print(f"{state}: F={report.fidelity:.16e} rank={report.rank} iterations={len(report.iterations)}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_compare(args):
    model = read_model(args.model).matrix
    ref = read_matrix(args.reference)
    if model.shape != ref.shape:
        raise UsageError(f"shape mismatch: model {model.shape} vs reference {ref.shape}")
    diff = ex.sign_invariant_difference(model, ref)
    print(f"max sign-invariant difference {diff:.6e} (tol {args.tol:.1e})")
    return EXIT_OK if diff < args.tol else EXIT_MISMATCH


def _write_rows(path, header, rows):
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="", encoding="utf-8")
    try:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([v if isinstance(v, (str, int, bool)) else format_float(v) for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_sweep(args):
    if args.n < 2 or args.m < 1:
        raise UsageError("sweep needs --n >= 2 and --m >= 1")
    rows = ex.fidelity_sweep(args.n, args.m, args.seed)
    _write_rows(
        args.out,
        ["D", "F_orig_over_M", "relative_gain", "converged"],
        [(r.D, r.ratio, r.gain, int(r.converged)) for r in rows],
    )
    return EXIT_OK


def cmd_interp(args):
    sample = read_sample(args.input)
    if sample.n != 1 or sample.D != 1:
        raise UsageError("interp expects a scalar sample with columns weight,x0,f0")
    x, f = sample.alpha[:, 0], sample.beta[:, 0]
    model = ex.interpolate_scalar(x, f, args.n, args.d, seed=args.seed, weights=sample.weights)
    ys = np.linspace(x.min(), x.max(), args.grid)
    exact = np.interp(ys, x[np.argsort(x)], f[np.argsort(x)])
    f_max, p_max = model.max_probability(ys)
    p_vec = model.max_probability_vector(ys)
    rows = zip(ys, exact, model.radon_nikodym(ys), model.least_squares(ys), f_max, p_max, p_vec)
    _write_rows(args.out, ["x", "f_exact", "f_RN", "f_LS", "f_maxP", "P_max", "P_max_vector"], rows)
    if not model.report.converged:
        log.warning("channel solve did not converge; evaluators use the best available run")
    return EXIT_OK if model.report.converged else EXIT_NOT_CONVERGED


def build_parser():
    p = argparse.ArgumentParser(prog="isolearn", description="Learn partially unitary operators from data.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic sample CSV")
    g.add_argument("kind", choices=["euler3", "orth", "poly", "scalar"])
    g.add_argument("--angles", default=",".join(map(str, ex.SO3_ANGLES)), help="phi,theta,psi (euler3)")
    g.add_argument("--x0", help="initial vector, comma-separated (euler3)")
    g.add_argument("--dim", type=int, help="dimension (orth)")
    g.add_argument("--n", type=int, help="Chebyshev terms (poly)")
    g.add_argument("--d", type=int, help="Legendre terms (poly)")
    g.add_argument("--func", choices=sorted(SCALAR_FUNCTIONS), default="x2", help="scalar function")
    g.add_argument("--steps", type=int, default=1000, help="trajectory length")
    g.add_argument("--points", type=int, default=500, help="sample points (poly, scalar)")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--flips", action="store_true", help="random +-1 factor per stored vector")
    g.add_argument("--matrix-out", help="also write the generating matrix")
    g.add_argument("--out", required=True)
    g.set_defaults(func_cmd=cmd_gen)

    s = sub.add_parser("solve", help="solve for the optimal operator")
    s.add_argument("--input", required=True)
    s.add_argument("--channel", choices=["gram", "unit"], default="gram")
    s.add_argument("--n", type=int, help="use the first n x-columns")
    s.add_argument("--d", type=int, help="use the first d f-columns")
    s.add_argument("--runs", type=int, default=4)
    s.add_argument("--rank", type=int, default=0, help="first eigenstate rank")
    s.add_argument("--max-iters", type=int, default=100)
    s.add_argument("--seed", type=int, default=0, help="recorded in the model file")
    s.add_argument("--trace", action="store_true", help="print per-iteration diagnostics")
    s.add_argument("--out", required=True)
    s.set_defaults(func_cmd=cmd_solve)

    c = sub.add_parser("compare", help="compare a model with a reference matrix up to sign")
    c.add_argument("--model", required=True)
    c.add_argument("--reference", required=True)
    c.add_argument("--tol", type=float, default=1e-12)
    c.set_defaults(func_cmd=cmd_compare)

    w = sub.add_parser("sweep", help="optimal versus original fidelity for D = 1..n")
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--m", type=int, default=1000)
    w.add_argument("--seed", type=int, default=1)
    w.add_argument("--out")
    w.set_defaults(func_cmd=cmd_sweep)

    i = sub.add_parser("interp", help="interpolate a scalar sample through a learned channel")
    i.add_argument("--input", required=True)
    i.add_argument("--n", type=int, default=6)
    i.add_argument("--d", type=int, default=6)
    i.add_argument("--grid", type=int, default=201, help="query points")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--out")
    i.set_defaults(func_cmd=cmd_interp)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func_cmd(args)
    except DegenerateMatrixError as exc:
        print(f"error: degenerate data: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, SampleFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
