"""Steps to convergence against the spectral gap, for inflation and for
first-order descent, on diagonal matrices {0, g, ..., 4}.

Inflation should scale like g**-0.5 and first-order descent like g**-1.

    python3 scripts/gap_scaling.py --gaps 1e-1 1e-2 1e-3 --seeds 5
"""
import argparse

import numpy as np

from inflation import (
    FirstOrderConfig,
    InflationConfig,
    SparseSymMatrix,
    first_order_descent,
    random_start,
    run_inflation,
)


def family(g, n):
    return SparseSymMatrix.from_diagonal(np.concatenate([[0.0], np.linspace(g, 4.0, n - 1)]))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--gaps", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--skip-first-order", action="store_true")
    args = ap.parse_args()

    rows = []
    for g in args.gaps:
        A = family(g, args.n)
        inf, fo = [], []
        for s in range(args.seeds):
            x0 = random_start(args.n, s)
            inf.append(run_inflation(A, x0, InflationConfig(gap=g, tol_mu=args.tol, max_steps=10**7))[0].steps)
            if not args.skip_first_order:
                fo.append(first_order_descent(A, x0, FirstOrderConfig(tol_mu=args.tol, max_steps=10**8))[0].steps)
        rows.append((g, np.mean(inf), np.mean(fo) if fo else np.nan))
        print(f"gap {g:8.1e}  inflation {rows[-1][1]:10.1f}  first-order {rows[-1][2]:12.1f}", flush=True)

    gs = np.log([r[0] for r in rows])
    print(f"log-log slope  inflation {np.polyfit(gs, np.log([r[1] for r in rows]), 1)[0]:+.3f}", end="")
    if not args.skip_first_order:
        print(f"  first-order {np.polyfit(gs, np.log([r[2] for r in rows]), 1)[0]:+.3f}")
    else:
        print()


if __name__ == "__main__":
    main()
