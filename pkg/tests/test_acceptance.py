"""Acceptance suite: one test per criterion, each at its stated tolerance
and runtime budget. Every test records a PASS/FAIL line that pytest prints
in the "acceptance criteria" summary section.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import math
import time

import numpy as np
import pytest

from inflation import (
    FirstOrderConfig,
    InflationConfig,
    QuarticConfig,
    SparseSymMatrix,
    StateVector,
    choose_timestep,
    first_order_descent,
    generate,
    gershgorin_bounds,
    inflation_step,
    jacobi_dense_eigen,
    lanczos_basic,
    multi_inflation,
    periodic_subspace_solve,
    project_normal_modes,
    quartic_descent,
    random_start,
    read_matrix_market,
    read_trace,
    run_inflation,
    windowed_solve,
    write_matrix_market,
    write_trace,
)
from inflation.dynamics import fit_decay_rate
from inflation.io import laplacian1d_spectrum

pytestmark = pytest.mark.acceptance


def _gap_family(g, n=100):
    """Diagonal spectrum {0, g, then evenly spaced up to 4}."""
    return SparseSymMatrix.from_diagonal(np.concatenate([[0.0], np.linspace(g, 4.0, n - 1)]))


GAPS = (1e-1, 1e-2, 1e-3)
SEEDS = range(5)


def _loglog_slope(gs, steps):
    return float(np.polyfit(np.log(gs), np.log(steps), 1)[0])


def test_criterion_01_fixed_point_invariance(report):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        A = generate(f"random_sparse:30:0.2:{seed}")
        oracle = jacobi_dense_eigen(A.to_dense())
        dt = choose_timestep(gershgorin_bounds(A))
        for i in range(A.n):
            s = StateVector.at_rest(oracle.vectors[:, i])
            e = oracle.values[i]
            for _ in range(100):
                with np.errstate(all="ignore"):
                    try:
                        new, _, _ = inflation_step(A, s, e, dt)
                    except ArithmeticError:
                        worst = math.inf
                        break
                    worst = max(worst, float(np.max(np.abs(new.x - s.x))))
                s = new
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-14 and elapsed < 1.0
    report("criterion 1 fixed-point invariance", ok, f"max per-step drift {worst:.3e} (< 1e-14), {elapsed:.2f}s (< 1s)")
    assert ok


def test_criterion_02_gap_scaling(report):
    t0 = time.perf_counter()
    steps = []
    for g in GAPS:
        A = _gap_family(g)
        runs = []
        for seed in SEEDS:
            res, _ = run_inflation(A, random_start(A.n, seed), InflationConfig(gap=g, tol_mu=1e-10, max_steps=10**6))
            assert res.converged[0]
            runs.append(res.steps)
        steps.append(np.mean(runs))
    slope = _loglog_slope(GAPS, steps)
    elapsed = time.perf_counter() - t0
    ok = abs(slope + 0.5) <= 0.1 and elapsed < 10
    report("criterion 2 steps vs gap (inflation)", ok, f"slope {slope:.3f} (-0.5 +- 0.1), steps {np.round(steps, 1).tolist()}, {elapsed:.2f}s")
    assert ok


def test_criterion_03_first_order_scaling(report):
    t0 = time.perf_counter()
    steps = []
    for g in GAPS:
        A = _gap_family(g)
        runs = []
        for seed in SEEDS:
            res, _ = first_order_descent(A, random_start(A.n, seed), FirstOrderConfig(tol_mu=1e-10, max_steps=10**6))
            assert res.converged[0]
            runs.append(res.steps)
        steps.append(np.mean(runs))
    slope = _loglog_slope(GAPS, steps)
    elapsed = time.perf_counter() - t0
    ok = abs(slope + 1.0) <= 0.15 and elapsed < 60
    report("criterion 3 steps vs gap (first order)", ok, f"slope {slope:.3f} (-1.0 +- 0.15), steps {np.round(steps, 1).tolist()}, {elapsed:.2f}s")
    assert ok


def test_criterion_04_stability_boundary(report):
    t0 = time.perf_counter()
    n = 200
    A = generate(f"laplacian1d:{n}")
    ev = laplacian1d_spectrum(n)
    omega_max = math.sqrt(ev[-1] - ev[0])
    gap = ev[1] - ev[0]
    x0 = random_start(n, 0)

    stable, _ = run_inflation(A, x0, InflationConfig(dt=0.9 * 2 / omega_max, gap=gap, adapt=False, max_steps=20000))

    _, tr = run_inflation(A, x0, InflationConfig(dt=1.1 * 2 / omega_max, gap=gap, adapt=False, max_steps=200))
    mu = tr.mu
    low = int(np.argmin(mu))
    grows = low < mu.size - 1 and mu[-1] > mu[low] and bool(np.all(np.diff(mu[-50:]) > 0))

    rec, _ = run_inflation(A, x0, InflationConfig(dt=1.1 * 2 / omega_max, gap=gap, adapt=True, max_steps=20000))
    elapsed = time.perf_counter() - t0
    ok = (
        stable.converged[0]
        and grows
        and rec.converged[0]
        and rec.info["halvings"] >= 1
        and abs(rec.values[0] - ev[0]) < 1e-4
        and elapsed < 5
    )
    report(
        "criterion 4 stability boundary",
        ok,
        f"0.9: converged={bool(stable.converged[0])} in {stable.steps}; 1.1: mu {mu[low]:.3g} -> {mu[-1]:.3g} over 200 steps; "
        f"halved x{rec.info['halvings']} then converged={bool(rec.converged[0])} in {rec.steps}; {elapsed:.2f}s",
    )
    assert ok


def test_criterion_05_mu_decay_law(report):
    t0 = time.perf_counter()
    A = SparseSymMatrix.from_diagonal(np.arange(10.0))
    dt = 0.1 * 2 / math.sqrt(9.0)
    _, tr = run_inflation(A, random_start(10, 0), InflationConfig(dt=dt, gap=1.0, tol_mu=1e-14, max_steps=10**5))
    mu = tr.mu
    t = tr.column("step") * dt
    sel = (mu <= 1e-4) & (mu >= 1e-12)
    rate = -fit_decay_rate(t[sel], mu[sel])
    elapsed = time.perf_counter() - t0
    ok = abs(rate - 2.0) <= 0.2 * 2.0 and elapsed < 5
    report("criterion 5 mu decay exponent", ok, f"fitted {rate:.3f} over mu in [1e-12, 1e-4] (2 +- 20%), {elapsed:.2f}s")
    assert ok


def test_criterion_06_optimal_inflation_rate(report):
    t0 = time.perf_counter()
    A = SparseSymMatrix.from_diagonal([0.0, 1.0, 5.0])
    dt = 0.01
    s = StateVector.at_rest(np.ones(3) / math.sqrt(3.0))
    basis = np.eye(3)
    ts, ratio = [], []
    for k in range(1001):
        xi = project_normal_modes(s, basis).xi
        ts.append(k * dt)
        ratio.append(abs(xi[0] / xi[1]))
        s, _, _ = inflation_step(A, s, 1.0, dt)
    ts, ratio = np.array(ts), np.array(ratio)
    late = ts >= 5.0
    rate = float(np.polyfit(ts[late], np.log(ratio[late]), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = abs(rate - 1.0) <= 0.1 and elapsed < 5
    report("criterion 6 inflation ratio exponent", ok, f"fitted {rate:.4f} for t in [5, 10] (1 +- 10%), {elapsed:.2f}s")
    assert ok


def test_criterion_07_windowed_near_degenerate(report):
    t0 = time.perf_counter()
    details = []
    ok = True
    for seed in range(3):
        A = generate(f"near_degenerate:50:1e-6:{seed}")
        e = jacobi_dense_eigen(A.to_dense()).values
        res, _ = windowed_solve(A, InflationConfig(window=0.5, tol_mu=1e-16, max_steps=20000), k=1, want=2, k_max=4)
        resid = np.sqrt(res.residuals[:2])
        err = np.abs(res.values[:2] - e[:2])
        win_ok = res.info["k"] <= 4 and np.all(resid < 1e-8) and np.all(err < 1e-10)
        plain, _ = run_inflation(
            A, None, InflationConfig(schedule="plain", tol_mu=1e-16, max_steps=res.matvecs)
        )
        plain_sep = abs(plain.values[0] - e[0]) < 1e-10 and math.sqrt(plain.residuals[0]) < 1e-8
        ok &= bool(win_ok) and not plain_sep
        details.append(
            f"seed {seed}: k={res.info['k']} m={res.matvecs} res={resid.max():.1e} err={err.max():.1e}; "
            f"plain err={abs(plain.values[0] - e[0]):.1e}"
        )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    report("criterion 7 windowed near-degenerate", ok, "; ".join(details) + f"; {elapsed:.2f}s")
    assert ok


def test_criterion_08_multi_eigenpair(report):
    t0 = time.perf_counter()
    A = generate("random_sparse:200:0.05:1")
    e = jacobi_dense_eigen(A.to_dense()).values[:4]
    multi, _ = multi_inflation(A, 4, InflationConfig(tol_mu=1e-12, max_steps=20000))
    per, _, log = periodic_subspace_solve(A, InflationConfig(tol_mu=1e-10, max_steps=20000), basis_size=6, period=6, want=4)
    err_m = float(np.max(np.abs(multi.values - e)))
    err_p = float(np.max(np.abs(per.values[:4] - e)))
    elapsed = time.perf_counter() - t0
    ok = err_m < 1e-8 and err_p < 1e-8 and elapsed < 60
    report(
        "criterion 8 lowest four pairs",
        ok,
        f"multi err {err_m:.1e} m={multi.matvecs}; periodic err {err_p:.1e} m={per.matvecs} "
        f"({len(log)} diagonalizations); {elapsed:.2f}s",
    )
    assert ok


def test_criterion_09_quartic(report):
    t0 = time.perf_counter()
    failures = 0
    worst = 0.0
    for mseed in range(20):
        A = generate(f"random_sparse:20:0.2:{mseed}")
        hi = gershgorin_bounds(A).hi
        e0 = jacobi_dense_eigen(A.to_dense()).values[0]
        for s in range(50):
            x0 = np.random.default_rng(1000 * mseed + s).standard_normal(A.n)
            vecs = []
            for kappa in (hi, 2 * hi):
                res, _ = quartic_descent(A, x0, QuarticConfig(kappa=kappa, max_steps=20000))
                d_val = abs(res.values[0] - e0)
                d_norm = abs(res.info["norm_sq"] - (1 - e0 / (2 * kappa)))
                worst = max(worst, d_val, d_norm)
                failures += not (res.converged[0] and d_val < 1e-6 and d_norm < 1e-6)
                vecs.append(res.vectors[:, 0])
            d_vec = float(np.max(np.abs(vecs[0] - vecs[1])))
            worst = max(worst, d_vec)
            failures += d_vec >= 1e-6
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 60
    report("criterion 9 quartic soft constraint", ok, f"{failures} failures in 1000 starts x 2 kappa, worst deviation {worst:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_10_oracle_layer(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    worst_j = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 51))
        B = rng.standard_normal((n, n))
        M = B + B.T
        o = jacobi_dense_eigen(M)
        worst_j = max(worst_j, float(np.max(np.linalg.norm(M @ o.vectors - o.vectors * o.values, axis=0))))
    worst_l = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 11))
        B = rng.standard_normal((n, n))
        M = B + B.T
        A = SparseSymMatrix.from_dense(M)
        res, _ = lanczos_basic(A, rng.standard_normal(n), n)
        ref = jacobi_dense_eigen(M).values
        worst_l = max(worst_l, float(np.max(np.abs(res.values - ref))) if len(res) == n else math.inf)
    elapsed = time.perf_counter() - t0
    ok = worst_j < 1e-10 and worst_l < 1e-10 and elapsed < 10
    report("criterion 10 oracle layer", ok, f"jacobi residual {worst_j:.1e}, lanczos spectrum err {worst_l:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_11_determinism_and_io(report):
    t0 = time.perf_counter()
    A = generate("random_sparse:60:0.1:11")
    cfg = InflationConfig(seed=3, max_steps=500)
    t1 = write_trace(run_inflation(A, None, cfg)[1])
    t2 = write_trace(run_inflation(A, None, cfg)[1])
    same_trace = t1 == t2
    trace_rt = write_trace(read_trace(t1)) == t1
    mm = write_matrix_market(A)
    B = read_matrix_market(mm)
    mm_rt = B == A and write_matrix_market(B) == mm
    gen_det = generate("random_sparse:60:0.1:11") == A
    elapsed = time.perf_counter() - t0
    ok = same_trace and trace_rt and mm_rt and gen_det and elapsed < 5
    report(
        "criterion 11 determinism and I/O",
        ok,
        f"traces identical={same_trace}, trace round trip={trace_rt}, matrix round trip={mm_rt}, "
        f"generator repeat={gen_det}, {elapsed:.2f}s",
    )
    assert ok
