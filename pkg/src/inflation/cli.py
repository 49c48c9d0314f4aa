"""Command-line front end.

Exit codes: 0 converged, 1 usage or input error, 2 not converged (results
are still written). The default seed comes from ``INFLATION_SEED`` when set.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .core import MatvecCounter, gershgorin_bounds
from .dynamics import InflationConfig, InflationDiverged, ScanFailed, estimate_gap_scan, random_start, run_inflation
from .io import GeneratorSpec, MatrixMarketError, generate, read_matrix_market, write_matrix_market, write_trace
from .subspace import multi_inflation, periodic_subspace_solve, windowed_solve
from .variants import (
    POWER_MODES,
    FirstOrderConfig,
    QuarticConfig,
    first_order_descent,
    lanczos_basic,
    power_method,
    quartic_descent,
)

METHODS = ("inflation", "windowed", "multi", "periodic", "first-order", "power", "lanczos", "quartic")
BENCH_THRESHOLDS = (1e-4, 1e-8, 1e-12)

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("INFLATION_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"INFLATION_SEED must be an integer, got {raw!r}") from None


def _positive(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _dt(text):
    return text if text == "auto" else _positive(text)


def _add_source(p):
    p.add_argument("matrix", nargs="?", help="Matrix Market file")
    p.add_argument("--gen", metavar="SPEC", help="generator spec, e.g. laplacian1d:100")


def _add_dynamics(p):
    g = p.add_argument_group("dynamics")
    g.add_argument("--dt", type=_dt, default="auto", help="timestep or 'auto' (default auto)")
    g.add_argument("--safety", type=_positive, default=0.9, help="fraction of the stable step (default 0.9)")
    g.add_argument("--schedule", choices=("gap", "window", "plain"))
    g.add_argument("--gap", type=_positive, help="gap estimate for the gap schedule")
    g.add_argument("--window", type=_positive, help="window offset (default 5%% of the spectral range)")
    g.add_argument("--integrator", choices=("euler", "verlet"), default="euler")
    g.add_argument("--max-steps", type=int, default=10_000)
    g.add_argument("--tol-mu", type=_positive, help="residual tolerance (default 1e-10 * range^2)")
    g.add_argument("--no-adapt", action="store_true", help="disable automatic dt halving")
    g.add_argument("--seed", type=int, help="start-vector seed (default $INFLATION_SEED or 0)")


def _add_method_opts(p):
    g = p.add_argument_group("method options")
    g.add_argument("-k", "--pairs", type=int, default=1, help="eigenpairs wanted")
    g.add_argument("--basis-size", type=int, default=6, help="periodic solve basis size")
    g.add_argument("--period", type=int, default=6, help="periodic solve steps per diagonalization")
    g.add_argument("--krylov", type=int, default=1, help="initial windowed Krylov size")
    g.add_argument("--power-mode", choices=POWER_MODES, default="smallest_shifted")
    g.add_argument("--lanczos-m", type=int, help="Lanczos steps (default min(n, max-steps))")
    g.add_argument("--no-store-basis", action="store_true", help="Lanczos without basis storage")
    g.add_argument("--dbeta", type=_dt, default="auto", help="first-order step or 'auto'")
    g.add_argument("--kappa", type=_positive, help="quartic stiffness (default Gershgorin hi)")
    g.add_argument("--damping", type=float, help="quartic damping (default sqrt(range)/10)")
    g.add_argument("--tol-grad", type=_positive, default=1e-10, help="quartic gradient tolerance")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inflation", description="Eigenpairs by inflationary dynamics.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one matrix with one method")
    _add_source(p)
    p.add_argument("--method", choices=METHODS, default="inflation")
    _add_dynamics(p)
    _add_method_opts(p)
    p.add_argument("--trace", type=Path, help="write the convergence trace (CSV)")
    p.add_argument("--vectors", type=Path, help="write eigenvectors as columns (text)")

    p = sub.add_parser("bench", help="compare methods from the same start vector")
    _add_source(p)
    p.add_argument("--methods", required=True, help="comma-separated, at least two")
    _add_dynamics(p)
    _add_method_opts(p)
    p.add_argument("--out-dir", type=Path, help="directory for per-method traces")

    p = sub.add_parser("gen", help="write a generated test matrix")
    p.add_argument("spec", help="e.g. random_sparse:50:0.1:7")
    p.add_argument("-o", "--output", type=Path, help="output file (default stdout)")

    p = sub.add_parser("scan-gap", help="estimate the spectral gap by probing candidates")
    _add_source(p)
    p.add_argument("--candidates", required=True, help="comma-separated gap candidates")
    p.add_argument("--probe-steps", type=int, default=30)
    p.add_argument("--burn-in", type=int)
    _add_dynamics(p)
    return ap


# -- helpers ----------------------------------------------------------------


def _load(args):
    if (args.matrix is None) == (args.gen is None):
        raise UsageError("give exactly one of a matrix file or --gen SPEC")
    if args.gen is not None:
        try:
            return generate(GeneratorSpec.parse(args.gen))
        except ValueError as e:
            raise UsageError(f"bad generator spec: {e}") from None
    path = Path(args.matrix)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    try:
        return read_matrix_market(data)
    except (MatrixMarketError, ValueError, UnicodeDecodeError) as e:
        raise UsageError(f"{path}: {e}") from None


def _inflation_config(args, seed) -> InflationConfig:
    try:
        return InflationConfig(
            dt=args.dt,
            safety=args.safety,
            schedule=args.schedule,
            gap=args.gap,
            window=args.window,
            integrator=args.integrator,
            max_steps=args.max_steps,
            tol_mu=args.tol_mu,
            seed=seed,
            adapt=not args.no_adapt,
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def _validate_method_opts(args):
    if args.pairs < 1:
        raise UsageError("--pairs must be >= 1")
    if args.basis_size < 1 or args.period < 1 or args.krylov < 1:
        raise UsageError("--basis-size, --period and --krylov must be >= 1")
    if args.lanczos_m is not None and args.lanczos_m < 1:
        raise UsageError("--lanczos-m must be >= 1")
    if args.damping is not None and args.damping < 0:
        raise UsageError("--damping must be >= 0")


def run_method(method, A, x0, args, cfg, counter):
    """Run one method and return ``(EigenpairSet, Trace)``."""
    if method == "inflation":
        return run_inflation(A, x0, cfg, counter=counter)
    if method == "windowed":
        if cfg.resolved_schedule() != "window":
            raise UsageError("windowed needs the window schedule")
        return windowed_solve(A, cfg, args.krylov, want=args.pairs, x0=x0, counter=counter)
    if method == "multi":
        return multi_inflation(A, args.pairs, cfg, counter=counter)
    if method == "periodic":
        res, trace, _ = periodic_subspace_solve(
            A, cfg, args.basis_size, args.period, want=args.pairs, x0=x0, counter=counter
        )
        return res, trace
    bounds = gershgorin_bounds(A)
    if method == "first-order":
        fcfg = FirstOrderConfig(dbeta=args.dbeta, max_steps=cfg.max_steps, tol_mu=cfg.tol_mu)
        return first_order_descent(A, x0, fcfg, counter=counter)
    if method == "power":
        return power_method(
            A, args.power_mode, x0, cfg.max_steps, cfg.tolerance(bounds), counter=counter
        )
    if method == "lanczos":
        m = args.lanczos_m or min(A.n, cfg.max_steps)
        return lanczos_basic(
            A, x0, m, store_basis=not args.no_store_basis, tol=cfg.tol_mu, counter=counter
        )
    if method == "quartic":
        kappa = args.kappa if args.kappa is not None else max(bounds.hi, 1e-300)
        qcfg = QuarticConfig(
            kappa=kappa,
            damping=args.damping,
            max_steps=cfg.max_steps,
            tol_grad=args.tol_grad,
            seed=cfg.seed,
        )
        return quartic_descent(A, x0, qcfg, counter=counter)
    raise UsageError(f"unknown method {method!r}")


def _write_vectors(path: Path, res):
    np.savetxt(path, res.vectors, fmt="%.17g")


# -- commands ---------------------------------------------------------------


def cmd_solve(args, out=None) -> int:
    out = sys.stdout if out is None else out
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = _inflation_config(args, seed)
    _validate_method_opts(args)
    A = _load(args)
    x0 = random_start(A.n, seed)
    counter = MatvecCounter()
    t0 = time.perf_counter()
    try:
        res, trace = run_method(args.method, A, x0, args, cfg, counter)
    except InflationDiverged as e:
        print(f"diverged: {e}", file=sys.stderr)
        print(f"method {args.method}  converged no  matvecs {counter.count}", file=out)
        return EXIT_NOT_CONVERGED
    except ValueError as e:
        raise UsageError(str(e)) from None
    wall = time.perf_counter() - t0
    print(f"method {args.method}  n {A.n}  nnz {A.nnz}", file=out)
    print(f"{'i':>3} {'eigenvalue':>24} {'residual':>12} conv", file=out)
    for i in range(len(res)):
        mark = "yes" if res.converged[i] else "no"
        print(f"{i:>3} {res.values[i]:>24.16e} {res.residuals[i]:>12.3e} {mark}", file=out)
    ok = res.all_converged
    print(f"matvecs {counter.count}  steps {res.steps}  wall {wall:.3f}s  converged {'yes' if ok else 'no'}", file=out)
    if args.trace is not None:
        args.trace.write_bytes(write_trace(trace))
    if args.vectors is not None:
        _write_vectors(args.vectors, res)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def _fmt_m(m):
    return "-" if m is None else str(m)


def cmd_bench(args, out=None) -> int:
    out = sys.stdout if out is None else out
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if len(methods) < 2:
        raise UsageError("bench needs at least two methods")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown methods {bad}; choose from {METHODS}")
    if len(set(methods)) != len(methods):
        raise UsageError("methods must be distinct")
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = _inflation_config(args, seed)
    _validate_method_opts(args)
    A = _load(args)
    x0 = random_start(A.n, seed)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
    header = ["method"] + [f"m@{t:.0e}" for t in BENCH_THRESHOLDS] + ["lambda0", "matvecs", "status"]
    rows = []
    all_ok = True
    for method in methods:
        counter = MatvecCounter()
        try:
            res, trace = run_method(method, A, x0.copy(), args, cfg, counter)
        except (InflationDiverged, ValueError, RuntimeError, UsageError) as e:
            rows.append([method] + ["-"] * len(BENCH_THRESHOLDS) + ["nan", str(counter.count), f"failed: {e}"])
            all_ok = False
            continue
        if args.out_dir is not None:
            (args.out_dir / f"trace_{method}.csv").write_bytes(write_trace(trace))
        ms = [_fmt_m(trace.first_m_below(t)) for t in BENCH_THRESHOLDS]
        status = "converged" if res.all_converged else "not converged"
        all_ok &= res.all_converged
        rows.append([method] + ms + [f"{res.values[0]:.16e}", str(counter.count), status])
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    for r in [header] + rows:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip(), file=out)
    return EXIT_OK if all_ok else EXIT_NOT_CONVERGED


def cmd_gen(args, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        A = generate(GeneratorSpec.parse(args.spec))
    except ValueError as e:
        raise UsageError(f"bad generator spec: {e}") from None
    data = write_matrix_market(A, comment=f"generated by inflation gen {args.spec}")
    b = gershgorin_bounds(A)
    summary = f"n {A.n}  nnz {A.nnz}  gershgorin [{b.lo:.17g}, {b.hi:.17g}]"
    if args.output is None:
        sys.stdout.buffer.write(data)
        print(summary, file=sys.stderr)
    else:
        args.output.write_bytes(data)
        print(summary, file=out)
    return EXIT_OK


def cmd_scan_gap(args, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        cands = [float(c) for c in args.candidates.split(",") if c.strip()]
    except ValueError:
        raise UsageError(f"bad candidate list {args.candidates!r}") from None
    if not cands:
        raise UsageError("need at least one gap candidate")
    if args.probe_steps < 2:
        raise UsageError("--probe-steps must be >= 2")
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = _inflation_config(args, seed)
    A = _load(args)
    try:
        best, slopes = estimate_gap_scan(
            A, random_start(A.n, seed), cands, args.probe_steps, burn_in=args.burn_in, cfg=cfg, details=True
        )
    except ScanFailed as e:
        print(f"scan failed: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ValueError as e:
        raise UsageError(str(e)) from None
    print(f"{'candidate':>12} {'slope':>14}", file=out)
    for c, s in zip(cands, slopes):
        print(f"{c:>12.6g} {s:>14.6g}", file=out)
    print(f"winner {best:.6g}", file=out)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "gen": cmd_gen, "scan-gap": cmd_scan_gap}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; the contract reserves 2
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
