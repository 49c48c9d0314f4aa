"""Small dense eigenproblems, Rayleigh-Ritz, and the subspace solvers built
on top of inflation: the windowed k-vector solve, orthogonality-constrained
multi-vector inflation, and periodic diagonalization along one trajectory.
"""
from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from .core import (
    ConvergenceRecord,
    EigenpairSet,
    MatvecCounter,
    SparseSymMatrix,
    StateVector,
    Trace,
    canonical_sign,
    gershgorin_bounds,
    matvec,
)
from .dynamics import Evolution, InflationConfig, InflationDiverged, random_start

log = logging.getLogger(__name__)


# -- dense eigensolver ------------------------------------------------------


def _round_robin(n: int):
    """Pair schedule visiting every (p, q) once per sweep, n/2 disjoint
    pairs per round."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a >= 0 and b >= 0]
        if pairs:
            rounds.append((np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_dense_eigen(M, *, sym_tol: float = 1e-12, max_sweeps: int = 60) -> EigenpairSet:
    """All eigenpairs of a dense symmetric matrix by cyclic Jacobi rotations.

    Rotations on disjoint index pairs are applied together (round-robin
    ordering), which keeps every sweep vectorized.
    """
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = np.linalg.norm(M)
    if np.linalg.norm(M - M.T) > sym_tol * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    n = M.shape[0]
    a = 0.5 * (M + M.T)
    V = np.eye(n)
    rounds = _round_robin(n)
    target = 1e-15 * scale
    diag = np.eye(n, dtype=bool)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        off = np.linalg.norm(a[~diag])
        if off <= target:
            break
        for P, Q in rounds:
            apq = a[P, Q]
            active = apq != 0.0
            if not active.any():
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            with np.errstate(over="ignore"):
                theta = (a[Q, Q] - a[P, P]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            rp, rq = a[P, :].copy(), a[Q, :].copy()
            a[P, :] = c[:, None] * rp - s[:, None] * rq
            a[Q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, P].copy(), a[:, Q].copy()
            a[:, P] = cp * c - cq * s
            a[:, Q] = cp * s + cq * c
            a[P, Q] = a[Q, P] = 0.0
            vp, vq = V[:, P].copy(), V[:, Q].copy()
            V[:, P] = vp * c - vq * s
            V[:, Q] = vp * s + vq * c
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w, V = w[order], canonical_sign(V[:, order])
    R = M @ V - V * w
    res = np.sum(R * R, axis=0)
    return EigenpairSet(w, V, res, np.ones(n, bool), info={"sweeps": sweeps})


# -- orthonormalization -----------------------------------------------------


def _as_columns(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        return np.array(vectors, dtype=float)
    cols = [np.asarray(v, dtype=float) for v in vectors]
    if not cols:
        raise ValueError("need at least one vector")
    if len({c.shape for c in cols}) != 1:
        raise ValueError("vectors must have equal length")
    return np.stack(cols, axis=1)


def _mgs(V: np.ndarray, drop_tol: float):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Returns ``(Q, T, kept)`` with ``Q = V @ T``; ``kept`` lists the input
    columns that survived.
    """
    n, k = V.shape
    Q = np.zeros((n, 0))
    T = np.zeros((k, 0))
    kept = []
    for j in range(k):
        v = V[:, j].copy()
        coef = np.zeros(k)
        coef[j] = 1.0
        orig = np.linalg.norm(v)
        if orig == 0.0 or not np.isfinite(orig):
            continue
        for _ in range(2):
            for i in range(Q.shape[1]):
                h = Q[:, i] @ v
                v -= h * Q[:, i]
                coef -= h * T[:, i]
        nrm = np.linalg.norm(v)
        if nrm < drop_tol * orig:
            continue
        Q = np.column_stack([Q, v / nrm])
        T = np.column_stack([T, coef / nrm])
        kept.append(j)
    return Q, T, kept


def orthonormalize(vectors, drop_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as columns) for the span of ``vectors``; columns
    whose projected norm falls below ``drop_tol`` times their own norm are
    dropped. Returns an ``n x 0`` array if nothing survives."""
    Q, _, _ = _mgs(_as_columns(vectors), drop_tol)
    return Q


# -- Rayleigh-Ritz ----------------------------------------------------------


def rayleigh_ritz(
    A: SparseSymMatrix,
    vectors,
    products=None,
    *,
    drop_tol: float = 1e-10,
    counter: Optional[MatvecCounter] = None,
) -> EigenpairSet:
    """Ritz pairs of ``A`` on the span of ``vectors``.

    If ``products`` (``A`` applied to each vector, same layout) is given no
    matvec is spent; otherwise one product per retained basis vector.
    Residuals are squared norms ``|A y - theta y|^2`` of the unit Ritz vectors.
    """
    V = _as_columns(vectors)
    Q, T, kept = _mgs(V, drop_tol)
    if Q.shape[1] == 0:
        raise ValueError("vectors span the zero subspace")
    if products is None:
        AQ = matvec(A, Q, counter)
    else:
        AQ = _as_columns(products) @ T
    H = Q.T @ AQ
    H = 0.5 * (H + H.T)
    small = jacobi_dense_eigen(H)
    Y = Q @ small.vectors
    AY = AQ @ small.vectors
    nrm = np.linalg.norm(Y, axis=0)
    Y, AY = Y / nrm, AY / nrm
    R = AY - Y * small.values
    res = np.sum(R * R, axis=0)
    signs = np.sign(Y[np.argmax(np.abs(Y), axis=0), np.arange(Y.shape[1])])
    signs[signs == 0] = 1.0
    out = EigenpairSet(small.values, Y * signs, res, np.zeros(len(res), bool))
    out.info["products"] = AY * signs
    out.info["rank"] = Q.shape[1]
    return out


def _krylov_pairs(A, x, y, k, sigma, counter):
    """Krylov basis ``{x, (A-s)x, ...}`` of size ``k`` with its products.

    ``y = A x`` is already known, so ``k - 1`` new products are spent.
    Each new direction is orthogonalized against the previous ones before
    normalizing, which spans the same space as raw powers.
    """
    n = x.size
    nrm = np.linalg.norm(x)
    basis = [x / nrm]
    prods = [y / nrm]
    for _ in range(1, k):
        w = prods[-1] - sigma * basis[-1]
        for _ in range(2):
            for b in basis:
                w = w - (b @ w) * b
        wn = np.linalg.norm(w)
        if wn == 0.0 or not np.isfinite(wn):
            break
        w = w / wn
        basis.append(w)
        prods.append(matvec(A, w, counter))
    return np.stack(basis, axis=1), np.stack(prods, axis=1)


def windowed_solve(
    A: SparseSymMatrix,
    cfg: Optional[InflationConfig] = None,
    k: int = 1,
    *,
    want: int = 1,
    k_max: int = 32,
    check_every: int = 10,
    x0=None,
    counter: Optional[MatvecCounter] = None,
):
    """Inflate with border ``lam + w`` and diagonalize over a k-vector Krylov
    basis built from the inflated vector.

    Every ``check_every`` steps the lowest ``want`` Ritz pairs are checked
    against the tolerance. When the best residual stops improving at the
    current ``k`` (less than a factor 2 since the last check), ``k`` grows
    by one, up to ``k_max``. Returns ``(EigenpairSet, Trace)``; the set holds
    up to ``k`` Ritz pairs, ``info["k"]`` the final basis size and
    ``info["inflation_steps"]`` the steps spent before the last
    diagonalization.
    """
    if k < 1 or want < 1:
        raise ValueError("k and want must be >= 1")
    cfg = cfg or InflationConfig()
    if cfg.resolved_schedule() != "window":
        raise ValueError("windowed_solve needs a window schedule")
    counter = counter if counter is not None else MatvecCounter()
    if x0 is None:
        x0 = random_start(A.n, cfg.seed)
    ev = Evolution(A, x0, cfg, counter=counter)
    tol = cfg.tolerance(ev.bounds)
    k_cur = max(k, 1)
    prev_best = math.inf
    ritz = None
    while True:
        ev.advance()
        if ev.step % check_every and ev.step < cfg.max_steps:
            continue
        basis, prods = _krylov_pairs(A, ev.x_eval, ev.y_eval, min(k_cur, A.n), ev.lam, counter)
        ritz = rayleigh_ritz(A, basis, prods)
        low = ritz.residuals[: min(want, len(ritz))]
        ritz.converged = ritz.residuals <= tol
        if len(ritz) >= want and np.all(low <= tol):
            break
        if ev.step >= cfg.max_steps:
            break
        if len(ritz) < want:
            if k_cur < min(k_max, A.n):
                k_cur += 1
            continue
        best = float(low.max())
        if best > 0.5 * prev_best and k_cur < k_max:
            k_cur += 1
            prev_best = math.inf
        else:
            prev_best = min(prev_best, best)
    ritz.matvecs = counter.count
    ritz.steps = ev.step
    ritz.info.update(k=k_cur, inflation_steps=ev.step, window=ev.offset, dt=ev.dt)
    ritz.info.pop("products", None)
    return ritz, ev.trace


# -- multi-vector inflation -------------------------------------------------


def _gs_pair(X, P, drop_tol):
    """Orthonormalize columns of X in order, applying the same triangular
    transform to P. Returns (X, P, dropped_indices)."""
    n, k = X.shape
    Xo = X.copy()
    Po = P.copy()
    dropped = []
    for j in range(k):
        orig = np.linalg.norm(Xo[:, j])
        for _ in range(2):
            for i in range(j):
                if i in dropped:
                    continue
                h = Xo[:, i] @ Xo[:, j]
                Xo[:, j] -= h * Xo[:, i]
                Po[:, j] -= h * Po[:, i]
        nrm = np.linalg.norm(Xo[:, j])
        if not nrm > drop_tol * orig or not np.isfinite(nrm):
            dropped.append(j)
            continue
        Xo[:, j] /= nrm
        Po[:, j] /= nrm
    return Xo, Po, dropped


def multi_inflation(
    A: SparseSymMatrix,
    k: int,
    cfg: Optional[InflationConfig] = None,
    *,
    X0=None,
    counter: Optional[MatvecCounter] = None,
    max_collapses: int = 10,
):
    """Evolve ``k`` vectors at once, kept orthonormal after every step.

    Each vector gets its own border ``lam_a + offset``. After the update the
    set is sorted by Rayleigh quotient and Gram-Schmidt is applied to the
    coordinates; the same triangular transform is applied to the momenta.
    A vector lost to rank collapse is replaced by a fresh random one.
    Returns ``(EigenpairSet, Trace)``; each trace record holds the lowest
    Rayleigh quotient of the set and the worst ``mu``.
    """
    if k < 1 or k > A.n:
        raise ValueError("need 1 <= k <= n")
    cfg = cfg or InflationConfig()
    counter = counter if counter is not None else MatvecCounter()
    bounds = gershgorin_bounds(A)
    dt = cfg.timestep(bounds)
    offset = cfg.offset(bounds)
    tol = cfg.tolerance(bounds)
    rng = np.random.default_rng(cfg.seed)
    if X0 is None:
        X = rng.standard_normal((A.n, k))
    else:
        X = _as_columns(X0)
        if X.shape != (A.n, k):
            raise ValueError("start block has wrong shape")
    P = np.zeros_like(X)
    X, P, dropped = _gs_pair(X, P, 1e-10)
    collapses = 0

    def reseed(X, P, dropped):
        nonlocal collapses
        while dropped:
            collapses += len(dropped)
            if collapses > max_collapses:
                raise InflationDiverged("vector set keeps collapsing")
            for j in dropped:
                X[:, j] = rng.standard_normal(A.n)
                P[:, j] = 0.0
            X, P, dropped = _gs_pair(X, P, 1e-10)
        return X, P

    X, P = reseed(X, P, dropped)
    trace = Trace()
    step = 0
    converged = False
    while True:
        Y = matvec(A, X, counter)
        lam = np.einsum("ij,ij->j", X, Y)
        R = Y - X * lam
        mu = np.einsum("ij,ij->j", R, R)
        trace.append(
            ConvergenceRecord(step, counter.count, float(lam.min()), float(mu.max()), dt, float(lam.min()) + offset)
        )
        step += 1
        if np.all(mu <= tol):
            converged = True
            break
        if step >= cfg.max_steps:
            break
        P = P - (Y - X * (lam + offset)) * dt
        Xn = X + P * dt
        if not (np.all(np.isfinite(Xn)) and np.all(np.isfinite(P))):
            raise InflationDiverged(f"non-finite block at step {step}")
        order = np.argsort(lam, kind="stable")
        Xn, P = Xn[:, order], P[:, order]
        X, P, dropped = _gs_pair(Xn, P, 1e-10)
        X, P = reseed(X, P, dropped)
    order = np.argsort(lam, kind="stable")
    Xs = canonical_sign(X[:, order])
    out = EigenpairSet(
        lam[order], Xs, mu[order], mu[order] <= tol, matvecs=counter.count, steps=step,
        info={"dt": dt, "offset": offset, "collapses": collapses},
    )
    return out, trace


RESTARTS = ("sum", "lowest", "none")


def periodic_subspace_solve(
    A: SparseSymMatrix,
    cfg: Optional[InflationConfig] = None,
    basis_size: int = 6,
    period: int = 6,
    want: int = 1,
    *,
    restart: str = "sum",
    keep: Optional[int] = None,
    x0=None,
    counter: Optional[MatvecCounter] = None,
):
    """Evolve one vector and diagonalize over its recent iterates.

    Every ``period`` steps the last ``basis_size`` evaluated iterates (their
    products come free with the steps) plus the ``keep`` lowest Ritz
    vectors of the previous diagonalization go through Rayleigh-Ritz.
    The kept vectors' products are recomputed (``keep`` matvecs per cycle);
    reusing them would compound rounding error cycle after cycle.

    After each diagonalization the dynamics restarts at rest from the sum
    of the ``want`` lowest Ritz vectors (``"sum"``), from the lowest one
    (``"lowest"``), or keeps running (``"none"``). With ``basis_size=1``
    neither restart nor carry-over happens and the run is plain inflation.
    Stops when the lowest ``want`` Ritz pairs meet the tolerance.

    Returns ``(EigenpairSet, Trace, ritz_log)``; ``ritz_log`` holds
    ``(m, ritz_values)`` for every diagonalization.
    """
    if not basis_size >= want >= 1 or period < 1:
        raise ValueError("need basis_size >= want >= 1 and period >= 1")
    if restart not in RESTARTS:
        raise ValueError(f"restart must be one of {RESTARTS}")
    keep = want if keep is None else keep
    if basis_size == 1:
        restart, keep = "none", 0
    cfg = cfg or InflationConfig()
    counter = counter if counter is not None else MatvecCounter()
    if x0 is None:
        x0 = random_start(A.n, cfg.seed)
    ev = Evolution(A, x0, cfg, counter=counter)
    tol = cfg.tolerance(ev.bounds)
    xs, ys = [], []
    ritz_log = []
    best = None
    while True:
        ev.advance()
        nrm = np.linalg.norm(ev.x_eval)
        xs.append(ev.x_eval / nrm)
        ys.append(ev.y_eval / nrm)
        del xs[:-basis_size], ys[:-basis_size]
        at_end = ev.step >= cfg.max_steps
        if ev.step % period and not at_end:
            continue
        if keep and best is not None:
            kx = best.vectors[:, : min(keep, len(best))]
            ky = matvec(A, kx, counter)
            ritz = rayleigh_ritz(A, np.column_stack([kx] + xs), np.column_stack([ky] + ys))
        else:
            ritz = rayleigh_ritz(A, xs, ys)
        ritz.converged = ritz.residuals <= tol
        ritz_log.append((counter.count, ritz.values.copy()))
        best = ritz
        if (len(ritz) >= want and np.all(ritz.converged[:want])) or at_end:
            break
        if restart != "none":
            if restart == "lowest":
                x_new = ritz.vector(0)
            else:
                x_new = ritz.vectors[:, : min(want, len(ritz))].sum(axis=1)
            ev.state = StateVector.at_rest(x_new / np.linalg.norm(x_new))
            ev.prev_mu = math.inf
            ev.rises = 0
            xs.clear()
            ys.clear()
    n_out = min(want, len(best))
    out = EigenpairSet(
        best.values[:n_out],
        best.vectors[:, :n_out],
        best.residuals[:n_out],
        best.converged[:n_out],
        matvecs=counter.count,
        steps=ev.step,
        info={"dt": ev.dt, "offset": ev.offset, "diagonalizations": len(ritz_log)},
    )
    return out, ev.trace, ritz_log
