"""Several lowest eigenpairs by multi-vector inflation and by periodic
diagonalization over recent iterates, checked against a dense solve.

    python3 scripts/lowest_pairs.py --gen random_sparse:200:0.05:1 -k 4
"""
import argparse

import numpy as np

from inflation import InflationConfig, generate, multi_inflation, periodic_subspace_solve


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--gen", default="random_sparse:200:0.05:1")
    ap.add_argument("-k", type=int, default=4)
    ap.add_argument("--basis-size", type=int, default=6)
    ap.add_argument("--period", type=int, default=6)
    ap.add_argument("--tol", type=float, default=1e-10)
    ap.add_argument("--max-steps", type=int, default=50_000)
    args = ap.parse_args()

    A = generate(args.gen)
    ref = np.linalg.eigvalsh(A.to_dense())[: args.k]
    cfg = InflationConfig(tol_mu=args.tol, max_steps=args.max_steps)

    multi, _ = multi_inflation(A, args.k, cfg)
    per, _, log = periodic_subspace_solve(A, cfg, args.basis_size, args.period, want=args.k)

    print(f"{'i':>3} {'dense':>20} {'multi err':>11} {'periodic err':>13}")
    for i in range(args.k):
        print(f"{i:>3} {ref[i]:>20.14f} {abs(multi.values[i] - ref[i]):>11.2e} {abs(per.values[i] - ref[i]):>13.2e}")
    print(
        f"matvecs  multi {multi.matvecs} (converged {multi.all_converged})  "
        f"periodic {per.matvecs} ({len(log)} diagonalizations, converged {bool(np.all(per.converged[: args.k]))})"
    )


if __name__ == "__main__":
    main()
