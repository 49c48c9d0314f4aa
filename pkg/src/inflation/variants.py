"""Baseline eigensolvers used for comparison, and the quartic
soft-constraint solver.

All of them report cost in matvecs through the same counting layer as the
inflation solvers, and log a :class:`Trace` so runs can be compared on
equal terms. Methods without a timestep or border log ``nan`` in those
columns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import (
    ConvergenceRecord,
    EigenpairSet,
    MatvecCounter,
    SparseSymMatrix,
    SpectralBounds,
    Trace,
    canonical_sign,
    gershgorin_bounds,
    matvec,
    normalize,
)
from .dynamics import DegenerateSpectrum, InflationDiverged, choose_timestep
from .subspace import jacobi_dense_eigen

NAN = math.nan

# mu this many times above its running minimum means the update is unstable
_BLOWUP_FACTOR = 1e8


def _default_tol(bounds: SpectralBounds) -> float:
    return 1e-10 * max(bounds.width**2, np.finfo(float).tiny)


def _mu(x, y, lam) -> float:
    r = y - lam * x
    return float(r @ r) / float(x @ x)


# -- first-order descent ----------------------------------------------------


@dataclass
class FirstOrderConfig:
    """``dbeta="auto"`` uses ``1/(hi - lo)`` from Gershgorin bounds."""

    dbeta: Union[float, str] = "auto"
    max_steps: int = 100_000
    tol_mu: Optional[float] = None

    def __post_init__(self):
        if self.dbeta != "auto" and not float(self.dbeta) > 0:
            raise ValueError("dbeta must be positive or 'auto'")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.tol_mu is not None and not self.tol_mu > 0:
            raise ValueError("tol_mu must be positive")

    def step_size(self, bounds: SpectralBounds) -> float:
        if self.dbeta != "auto":
            return float(self.dbeta)
        return 1.0 / bounds.width if bounds.width > 0 else 1.0


def first_order_descent(A: SparseSymMatrix, x0, cfg: Optional[FirstOrderConfig] = None, *, counter=None):
    """Explicit Euler on ``dx/dbeta = -(A - lam) x`` with normalization.

    Returns ``(EigenpairSet, Trace)``. Raises :class:`InflationDiverged`
    when a user step size is past the stability limit. Below ``2/(hi - lo)``
    the Rayleigh quotient can only fall, so a rise beyond rounding (or a
    blow-up of ``mu``) marks an unstable step.
    """
    cfg = cfg or FirstOrderConfig()
    counter = counter if counter is not None else MatvecCounter()
    bounds = gershgorin_bounds(A)
    db = cfg.step_size(bounds)
    tol = cfg.tol_mu if cfg.tol_mu is not None else _default_tol(bounds)
    x = normalize(x0)
    trace = Trace()
    best = math.inf
    lam_min = math.inf
    slack = 1e-12 * (abs(bounds.lo) + abs(bounds.hi) + bounds.width)
    step = 0
    while True:
        y = matvec(A, x, counter)
        lam = float(x @ y)
        mu = _mu(x, y, lam)
        trace.append(ConvergenceRecord(step, counter.count, lam, mu, db, lam))
        if not math.isfinite(mu) or mu > _BLOWUP_FACTOR * best or lam > lam_min + slack:
            raise InflationDiverged(f"first-order step {db:g} is unstable (step {step})")
        best = min(best, mu)
        lam_min = min(lam_min, lam)
        converged = mu <= tol
        if converged or step >= cfg.max_steps:
            break
        x = normalize(x - db * (y - lam * x))
        step += 1
    res = EigenpairSet([lam], canonical_sign(x)[:, None], [mu], [converged], counter.count, step, {"dbeta": db})
    return res, trace


# -- power method -----------------------------------------------------------

POWER_MODES = ("largest", "smallest_shifted")


def power_method(
    A: SparseSymMatrix,
    mode: str = "largest",
    x0=None,
    max_steps: int = 10_000,
    tol: Optional[float] = None,
    *,
    shift: Optional[float] = None,
    seed: int = 0,
    counter=None,
):
    """Power iteration on ``A`` (``largest``) or on ``hi*I - A``
    (``smallest_shifted``, with ``hi`` the Gershgorin upper bound unless
    ``shift`` is given). The reported eigenvalue belongs to ``A``.

    An iterate that returns to itself after two steps without converging
    (dominant eigenvalues ``+-s``) stops the run with ``info["oscillating"]``.
    """
    if mode not in POWER_MODES:
        raise ValueError(f"mode must be one of {POWER_MODES}")
    counter = counter if counter is not None else MatvecCounter()
    bounds = gershgorin_bounds(A)
    tol = tol if tol is not None else _default_tol(bounds)
    if x0 is None:
        x0 = np.random.default_rng(seed).standard_normal(A.n)
    s = (bounds.hi if shift is None else float(shift)) if mode == "smallest_shifted" else 0.0
    x = normalize(x0)
    recent = []  # the two previous iterates
    trace = Trace()
    oscillating = False
    step = 0
    while True:
        y = matvec(A, x, counter)
        lam = float(x @ y)
        mu = _mu(x, y, lam)
        trace.append(ConvergenceRecord(step, counter.count, lam, mu, NAN, NAN))
        converged = mu <= tol
        if converged or step >= max_steps:
            break
        if len(recent) == 2 and np.linalg.norm(x - recent[0]) < 1e-12:
            oscillating = True
            break
        z = s * x - y if mode == "smallest_shifted" else y
        recent = (recent + [x])[-2:]
        x = normalize(z)
        step += 1
    info = {"mode": mode, "shift": s, "oscillating": oscillating}
    res = EigenpairSet([lam], canonical_sign(x)[:, None], [mu], [converged], counter.count, step, info)
    return res, trace


# -- Lanczos ----------------------------------------------------------------


def _lanczos_pass(A, q1, m, counter, keep_basis):
    """Run the recurrence; return alphas, betas, basis (or None), breakdown
    flag and the per-step lowest Ritz estimates."""
    alphas, betas, history = [], [], []
    Q = [q1] if keep_basis else None
    q_prev, q = np.zeros_like(q1), q1
    beta_prev = 0.0
    scale = 0.0
    breakdown = False
    for j in range(m):
        w = matvec(A, q, counter)
        a = float(q @ w)
        w = w - a * q - beta_prev * q_prev
        if keep_basis:
            B = np.column_stack(Q)
            for _ in range(2):
                w = w - B @ (B.T @ w)
        b = float(np.linalg.norm(w))
        alphas.append(a)
        scale = max(scale, abs(a), b)
        # LAPACK for the per-step estimate; the final solve uses Jacobi
        w0, s0 = eigh_tridiagonal(alphas, betas, select="i", select_range=(0, 0))
        history.append((counter.count, float(w0[0]), float((b * s0[-1, 0]) ** 2)))
        if b < 1e-14 * max(1.0, scale):
            breakdown = True
            break
        if j == m - 1:
            break
        betas.append(b)
        q_prev, q, beta_prev = q, w / b, b
        if keep_basis:
            Q.append(q)
    return alphas, betas, b, Q, breakdown, history


def lanczos_basic(
    A: SparseSymMatrix,
    x0,
    m: int,
    *,
    store_basis: bool = True,
    tol: Optional[float] = None,
    counter=None,
):
    """Lanczos with full reorthogonalization.

    With ``store_basis=False`` only the last two basis vectors are kept (no
    reorthogonalization is possible) and the Ritz vectors are rebuilt by
    re-running the recurrence, costing a second ``m`` matvecs. The trace
    records the lowest Ritz value and its residual estimate per step.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    counter = counter if counter is not None else MatvecCounter()
    bounds = gershgorin_bounds(A)
    tol = tol if tol is not None else _default_tol(bounds)
    q1 = normalize(x0)
    alphas, betas, b_last, Q, breakdown, history = _lanczos_pass(A, q1, m, counter, store_basis)
    trace = Trace()
    for step, (cnt, val, res) in enumerate(history):
        trace.append(ConvergenceRecord(step, cnt, val, res, NAN, NAN))
    k = len(alphas)
    T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
    eig = jacobi_dense_eigen(T)
    if store_basis:
        V = np.column_stack(Q) @ eig.vectors
    else:
        # second pass regenerates the identical basis
        V = np.zeros((A.n, k))
        q_prev, q = np.zeros_like(q1), q1
        for j in range(k):
            V += np.outer(q, eig.vectors[j])
            if j == k - 1:
                break
            w = matvec(A, q, counter) - alphas[j] * q
            if j > 0:
                w -= betas[j - 1] * q_prev
            q_prev, q = q, w / betas[j]
        trace.append(ConvergenceRecord(len(history), counter.count, eig.values[0], history[-1][2], NAN, NAN))
    residuals = (0.0 if breakdown else b_last) ** 2 * eig.vectors[-1] ** 2
    converged = np.full(k, True) if breakdown else residuals <= tol
    info = {"breakdown": breakdown, "store_basis": store_basis, "krylov_dim": k}
    res = EigenpairSet(eig.values, canonical_sign(V), residuals, converged, counter.count, k, info)
    return res, trace


# -- quartic soft constraint ------------------------------------------------


def quartic_gradient(A: SparseSymMatrix, x, kappa: float, counter=None) -> np.ndarray:
    """Gradient of ``x.Ax + kappa (|x|^2 - 1)^2``."""
    x = np.asarray(x, dtype=float)
    return 2.0 * matvec(A, x, counter) + 4.0 * kappa * (float(x @ x) - 1.0) * x


@dataclass
class QuarticConfig:
    """Damped descent on the quartic pseudopotential.

    ``dt="auto"`` takes the stable step for the bounds widened by
    ``2*kappa*(3u - 1)``, where ``u >= 1`` bounds the ``|x|^2`` reachable
    from the start energy (``u = 1`` gives the familiar ``4*kappa``);
    ``damping=None`` means ``sqrt(hi - lo)/10``.
    """

    kappa: float
    dt: Union[float, str] = "auto"
    safety: float = 0.75
    damping: Optional[float] = None
    max_steps: int = 100_000
    tol_grad: float = 1e-10
    seed: int = 0
    max_perturbations: int = 10

    def __post_init__(self):
        if self.dt != "auto" and not float(self.dt) > 0:
            raise ValueError("dt must be positive or 'auto'")
        if self.damping is not None and self.damping < 0:
            raise ValueError("damping must be >= 0")
        if not self.tol_grad > 0:
            raise ValueError("tol_grad must be positive")


def _quartic_timestep(bounds, kappa, xAx, xx, safety):
    """Stable step over every point the damped motion can reach.

    Damping only removes energy, so ``|x|^2`` stays below the largest root
    ``u`` of ``kappa (u - 1)^2 + lo u = 2 E0`` with ``E0`` the start energy
    of the half potential. Its Hessian tops out at ``hi + 2 kappa (3u - 1)``.
    """
    lo = bounds.lo
    e2 = xAx + kappa * (xx - 1.0) ** 2
    b = 2.0 * kappa - lo
    disc = b * b - 4.0 * kappa * (kappa - e2)
    u = (b + math.sqrt(max(disc, 0.0))) / (2.0 * kappa)
    u = max(u, xx, 1.0)
    try:
        return choose_timestep(SpectralBounds(lo, bounds.hi + 2.0 * kappa * (3.0 * u - 1.0)), safety)
    except DegenerateSpectrum:
        return safety


def quartic_descent(A: SparseSymMatrix, x0, cfg: QuarticConfig, *, counter=None):
    """Heavy-ball descent to the global minimum of the quartic potential.

    The force is half the negative gradient, ``-(A - 2 kappa (1 - |x|^2)) x``,
    so ``2 kappa (1 - |x|^2)`` plays the part of the inflation border and the
    step limit matches the inflation map. Stops when the full gradient norm
    is below ``tol_grad``. Returns ``(EigenpairSet, Trace)`` with the
    Rayleigh quotient and the normalized minimizer; ``info["norm_sq"]`` is
    the final ``|x|^2``.
    """
    counter = counter if counter is not None else MatvecCounter()
    bounds = gershgorin_bounds(A)
    kappa = float(cfg.kappa)
    if not kappa > bounds.hi / 2:
        raise ValueError(f"kappa must exceed hi/2 = {bounds.hi / 2:g}")
    dt = None if cfg.dt == "auto" else float(cfg.dt)
    gamma = math.sqrt(bounds.width) / 10.0 if cfg.damping is None else float(cfg.damping)
    damp = None if dt is None else 1.0 - gamma * dt
    rng = np.random.default_rng(cfg.seed)
    x = np.array(x0, dtype=float)
    if x.shape != (A.n,) or not np.all(np.isfinite(x)) or not np.any(x):
        raise ValueError("start vector must be nonzero and finite")
    if float(x @ x) > 1.0:
        # a start far outside the ball carries ~kappa |x|^4 of energy
        x = x / np.linalg.norm(x)
    p = np.zeros_like(x)
    trace = Trace()
    perturbations = 0
    converged = False
    step = 0
    while True:
        xx = float(x @ x)
        if xx < 1e-24:
            if perturbations >= cfg.max_perturbations:
                raise RuntimeError("quartic descent stalled at the origin")
            perturbations += 1
            x = 1e-6 * rng.standard_normal(A.n)
            p[:] = 0.0
            if cfg.dt == "auto":
                dt = None
            continue
        y = matvec(A, x, counter)
        border = 2.0 * kappa * (1.0 - xx)
        if dt is None:
            dt = _quartic_timestep(bounds, kappa, float(x @ y), xx, cfg.safety)
            damp = 1.0 - gamma * dt
        force = border * x - y
        gnorm = 2.0 * math.sqrt(float(force @ force))
        lam = float(x @ y) / xx
        r = y - lam * x
        trace.records.append(ConvergenceRecord(step, counter.count, lam, float(r @ r) / xx, dt, border))
        if not math.isfinite(gnorm):
            raise InflationDiverged("quartic descent produced a non-finite state")
        if gnorm <= cfg.tol_grad:
            converged = True
            break
        if step >= cfg.max_steps:
            break
        p *= damp
        p += force * dt
        x = x + p * dt
        step += 1
    xx = float(x @ x)
    info = {
        "norm_sq": xx,
        "grad_norm": gnorm,
        "kappa": kappa,
        "dt": dt,
        "damping": gamma,
        "perturbations": perturbations,
    }
    v = canonical_sign(x / math.sqrt(xx))
    res = EigenpairSet([lam], v[:, None], [_mu(x, y, lam)], [converged], counter.count, step, info)
    return res, trace
