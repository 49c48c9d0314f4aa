"""Matvec cost of every method on one matrix, from a shared start vector.

Writes one trace CSV per method and prints the matvec count needed to reach
each residual threshold.

    python3 scripts/compare_methods.py --gen random_sparse:500:0.01:0 --out runs/cmp
"""
import argparse
import time
from pathlib import Path

import numpy as np

from inflation import (
    FirstOrderConfig,
    InflationConfig,
    MatvecCounter,
    QuarticConfig,
    first_order_descent,
    generate,
    gershgorin_bounds,
    lanczos_basic,
    power_method,
    quartic_descent,
    random_start,
    read_matrix_market,
    run_inflation,
    windowed_solve,
    write_trace,
)

THRESHOLDS = (1e-4, 1e-8, 1e-12)


def run_all(A, x0, tol, max_steps):
    b = gershgorin_bounds(A)
    runs = {
        "inflation": lambda c: run_inflation(A, x0, InflationConfig(tol_mu=tol, max_steps=max_steps), counter=c),
        "windowed": lambda c: windowed_solve(
            A, InflationConfig(tol_mu=tol, max_steps=max_steps), k=2, x0=x0, counter=c
        ),
        "first-order": lambda c: first_order_descent(
            A, x0, FirstOrderConfig(tol_mu=tol, max_steps=max_steps), counter=c
        ),
        "power": lambda c: power_method(A, "smallest_shifted", x0, max_steps, tol, counter=c),
        "lanczos": lambda c: lanczos_basic(A, x0, min(A.n, 300), tol=tol, counter=c),
        "quartic": lambda c: quartic_descent(A, x0, QuarticConfig(kappa=b.hi, max_steps=max_steps), counter=c),
    }
    for name, fn in runs.items():
        c = MatvecCounter()
        t0 = time.perf_counter()
        try:
            res, trace = fn(c)
        except Exception as e:  # keep going, report the failure
            yield name, None, None, c.count, time.perf_counter() - t0, str(e)
            continue
        yield name, res, trace, c.count, time.perf_counter() - t0, ""


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--gen", help="generator spec")
    src.add_argument("--matrix", type=Path, help="Matrix Market file")
    ap.add_argument("--tol", type=float, default=1e-12)
    ap.add_argument("--max-steps", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, help="directory for trace CSVs")
    args = ap.parse_args()

    A = generate(args.gen) if args.gen else read_matrix_market(args.matrix.read_bytes())
    x0 = random_start(A.n, args.seed)
    ref = np.linalg.eigvalsh(A.to_dense())[0] if A.n <= 2000 else np.nan
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)

    print(f"n={A.n} nnz={A.nnz} lowest eigenvalue (dense) {ref:.15g}")
    print(f"{'method':<12}" + "".join(f"{'m@%.0e' % t:>10}" for t in THRESHOLDS) + f"{'m':>9}{'|err|':>11}{'sec':>8}")
    for name, res, trace, m, sec, err in run_all(A, x0, args.tol, args.max_steps):
        if res is None:
            print(f"{name:<12} failed: {err}")
            continue
        hits = [trace.first_m_below(t) for t in THRESHOLDS]
        cells = "".join(f"{('-' if h is None else h):>10}" for h in hits)
        print(f"{name:<12}{cells}{m:>9}{abs(res.values[0] - ref):>11.2e}{sec:>8.2f}")
        if args.out:
            (args.out / f"trace_{name}.csv").write_bytes(write_trace(trace))


if __name__ == "__main__":
    main()
