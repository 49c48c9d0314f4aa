"""Inflation dynamics: a second-order iteration whose shifted multiplier
exponentially amplifies the lowest eigenmodes.

One step of the map (symplectic Euler form) is::

    p' = p - (A x - lt * x) * dt
    x' = x + p' * dt

where ``lt`` (lambda-tilde) is the inflation border: modes with eigenvalue
below it grow exponentially, modes above it oscillate. The Rayleigh quotient
``lam`` is read off the same ``A x`` product, so a step costs one matvec.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import (
    ConvergenceRecord,
    EigenpairSet,
    MatvecCounter,
    SparseSymMatrix,
    SpectralBounds,
    StateVector,
    Trace,
    canonical_sign,
    gershgorin_bounds,
    matvec,
    normalize,
)

log = logging.getLogger(__name__)

SCHEDULES = ("gap", "window", "plain")
INTEGRATORS = ("euler", "verlet")

# adaptive recovery: dt is halved after this many consecutive rises of mu,
# provided mu grew by _RISE_FACTOR or the last displacement was unstable
_RISES_BEFORE_HALVING = 5
_RISE_FACTOR = 100.0
_MAX_HALVINGS = 10


class DegenerateSpectrum(ValueError):
    """Spectral bounds collapse to a point (matrix is a multiple of I)."""


class InflationDiverged(ArithmeticError):
    """State became non-finite and could not be recovered."""


class ScanFailed(RuntimeError):
    """Every gap candidate produced a growing error."""


@dataclass
class InflationConfig:
    """Parameters of an inflation run.

    ``schedule`` picks the border: ``gap`` uses ``lam + gap``, ``window``
    uses ``lam + window``, ``plain`` uses ``lam``. Left as ``None`` it is
    inferred from whichever of ``gap``/``window`` is set, falling back to a
    window of 5% of the Gershgorin range.
    """

    dt: Union[float, str] = "auto"
    safety: float = 0.9
    schedule: Optional[str] = None
    gap: Optional[float] = None
    window: Optional[float] = None
    integrator: str = "euler"
    max_steps: int = 10_000
    tol_mu: Optional[float] = None
    normalize_every: int = 1
    seed: int = 0
    adapt: bool = True

    def __post_init__(self):
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError("dt must be positive or 'auto'")
        if not 0 < self.safety <= 1.5:
            raise ValueError("safety must lie in (0, 1.5]")
        if self.schedule is not None and self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.gap is not None and self.gap < 0:
            raise ValueError("gap estimate must be >= 0")
        if self.window is not None and self.window <= 0:
            raise ValueError("window must be positive")
        if self.schedule == "gap" and self.gap is None:
            raise ValueError("gap schedule needs a gap value")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.tol_mu is not None and self.tol_mu <= 0:
            raise ValueError("tol_mu must be positive")
        if self.normalize_every < 1:
            raise ValueError("normalize_every must be >= 1")

    def resolved_schedule(self) -> str:
        if self.schedule is not None:
            return self.schedule
        if self.gap is not None:
            return "gap"
        return "window"

    def offset(self, bounds: SpectralBounds) -> float:
        """Distance of the inflation border above the running Rayleigh quotient."""
        mode = self.resolved_schedule()
        if mode == "gap":
            return float(self.gap)
        if mode == "window":
            return float(self.window) if self.window is not None else 0.05 * bounds.width
        return 0.0

    def timestep(self, bounds: SpectralBounds) -> float:
        if self.dt != "auto":
            return float(self.dt)
        try:
            return choose_timestep(bounds, self.safety)
        except DegenerateSpectrum:
            return self.safety

    def tolerance(self, bounds: SpectralBounds) -> float:
        if self.tol_mu is not None:
            return float(self.tol_mu)
        return 1e-10 * max(bounds.width**2, np.finfo(float).tiny)


def choose_timestep(bounds: SpectralBounds, safety: float = 0.9) -> float:
    """Largest stable step ``2/omega_max`` scaled by ``safety``, where
    ``omega_max**2`` is the spectral width."""
    width = bounds.hi - bounds.lo
    if not width > 0:
        raise DegenerateSpectrum("spectral width is zero; any step is stable")
    return safety * 2.0 / math.sqrt(width)


def _border(lambda_tilde, lam: float) -> float:
    return lambda_tilde(lam) if callable(lambda_tilde) else float(lambda_tilde)


def inflation_step(
    A: SparseSymMatrix,
    s: StateVector,
    lambda_tilde: Union[float, Callable[[float], float]],
    dt: float,
    integrator: str = "euler",
    counter: Optional[MatvecCounter] = None,
):
    """Advance the state one step and return ``(new_state, lam, y)``.

    ``lambda_tilde`` is either a constant border or a function of the
    Rayleigh quotient measured in this step. ``lam`` is the Rayleigh quotient
    of the point where the force was evaluated and ``y`` is ``A`` applied to
    that point (its coordinates are ``s.x`` for euler, the half-step
    position for verlet).

    Raises :class:`InflationDiverged` if the new state is not finite.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x, p = s.x, s.p
    if integrator == "euler":
        xe = x
    elif integrator == "verlet":
        xe = x + 0.5 * dt * p
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    y = matvec(A, xe, counter)
    xx = float(xe @ xe)
    if not xx > 0:
        raise ValueError("state coordinates vanished")
    lam = float(xe @ y) / xx
    lt = _border(lambda_tilde, lam)
    p_new = p - (y - lt * xe) * dt
    if integrator == "euler":
        x_new = x + p_new * dt
    else:
        x_new = xe + 0.5 * dt * p_new
    out = StateVector(x_new, p_new)
    if not out.is_finite():
        raise InflationDiverged("non-finite state after inflation step")
    return out, lam, y


def random_start(n: int, seed: int) -> np.ndarray:
    """Seeded uniform random point on the unit sphere."""
    rng = np.random.default_rng(seed)
    return normalize(rng.standard_normal(n))


class Evolution:
    """Stateful driver shared by every solver built on the inflation map.

    Each call to :meth:`advance` evaluates the current point (one matvec),
    records ``(lam, mu)`` for it, and then moves the state. The evaluated
    point and its product are kept in ``x_eval``/``y_eval`` so callers can
    stop on the record without paying another product.
    """

    def __init__(
        self,
        A: SparseSymMatrix,
        x0,
        cfg: InflationConfig,
        *,
        bounds: Optional[SpectralBounds] = None,
        counter: Optional[MatvecCounter] = None,
        trace: Optional[Trace] = None,
        offset: Optional[float] = None,
        p0=None,
    ):
        self.A = A
        self.cfg = cfg
        self.bounds = bounds if bounds is not None else gershgorin_bounds(A)
        self.counter = counter if counter is not None else MatvecCounter()
        self.trace = trace if trace is not None else Trace()
        self.offset = cfg.offset(self.bounds) if offset is None else float(offset)
        self.dt = cfg.timestep(self.bounds)
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (A.n,):
            raise ValueError("start vector has wrong dimension")
        p0 = np.zeros(A.n) if p0 is None else np.asarray(p0, dtype=float)
        nrm = np.linalg.norm(x0)
        if not nrm > 0 or not np.isfinite(nrm):
            raise ValueError("start vector must be nonzero and finite")
        self.state = StateVector(x0 / nrm, p0 / nrm)
        self.step = 0
        self.halvings = 0
        self.rises = 0
        self.rise_base = math.inf
        self.prev_mu = math.inf
        self.x_eval = self.y_eval = None
        self.lam = self.mu = math.nan
        self._prev_eval = None
        self.stiffness = 0.0

    def border(self, lam: float) -> float:
        return lam + self.offset

    def advance(self) -> ConvergenceRecord:
        cfg = self.cfg
        last_good = self.state
        try:
            new, lam, y = inflation_step(
                self.A, self.state, self.border, self.dt, cfg.integrator, self.counter
            )
            xe = self.state.x if cfg.integrator == "euler" else self.state.x + 0.5 * self.dt * self.state.p
            xx = float(xe @ xe)
            r = y - lam * xe
            mu = float(r @ r) / xx
            finite = math.isfinite(mu) and math.isfinite(lam)
        except InflationDiverged:
            finite = False
            lam = mu = math.nan
            xe = y = None
        rec = ConvergenceRecord(
            self.step, self.counter.count, lam, mu, self.dt, lam + self.offset
        )
        self.trace.append(rec)
        self.x_eval, self.y_eval, self.lam, self.mu = xe, y, lam, mu
        self.step += 1
        if not finite:
            self._halve("non-finite state")
            nrm = np.linalg.norm(last_good.x)
            self.state = StateVector(last_good.x / nrm, np.zeros_like(last_good.x))
            self.prev_mu = math.inf
            self._prev_eval = None
            self.stiffness = 0.0
            return rec
        # stiffness seen by the displacement since the last evaluation; the
        # map is unstable along it when dt^2 * stiffness exceeds 4
        if self._prev_eval is not None:
            d = xe - self._prev_eval[0]
            dd = float(d @ d)
            if dd > 0:
                s_eff = float(d @ (y - self._prev_eval[1])) / dd - (lam + self.offset)
                self.stiffness = self.dt * self.dt * s_eff
        self._prev_eval = (xe, y)
        self.state = new
        if self.step % cfg.normalize_every == 0:
            nrm = np.linalg.norm(new.x)
            self.state = StateVector(new.x / nrm, new.p / nrm)
        if cfg.adapt:
            # ordinary oscillations of mu rise for a few steps by a small
            # factor; an unstable mode grows geometrically
            if mu > self.prev_mu:
                if self.rises == 0:
                    self.rise_base = self.prev_mu
                self.rises += 1
            else:
                self.rises = 0
            if self.rises >= _RISES_BEFORE_HALVING and (
                mu >= _RISE_FACTOR * self.rise_base or self.stiffness > 4.0
            ):
                self._halve(f"mu rose {self.rises} steps in a row")
                self.rises = 0
                self._prev_eval = None
                self.stiffness = 0.0
        self.prev_mu = mu
        return rec

    def _halve(self, why: str) -> None:
        if not self.cfg.adapt:
            raise InflationDiverged(f"{why} at step {self.step} (adaptation off)")
        if self.halvings >= _MAX_HALVINGS:
            raise InflationDiverged(f"{why}; dt already halved {self.halvings} times")
        self.dt *= 0.5
        self.halvings += 1
        log.info("step %d: %s, halving dt to %.6g", self.step, why, self.dt)


def _single_result(ev: Evolution, converged: bool) -> EigenpairSet:
    x = canonical_sign(ev.x_eval / np.linalg.norm(ev.x_eval))
    return EigenpairSet(
        [ev.lam],
        x[:, None],
        [ev.mu],
        [converged],
        matvecs=ev.counter.count,
        steps=ev.step,
        info={"dt": ev.dt, "halvings": ev.halvings, "offset": ev.offset},
    )


def run_inflation(
    A: SparseSymMatrix,
    x0=None,
    cfg: Optional[InflationConfig] = None,
    *,
    counter: Optional[MatvecCounter] = None,
):
    """Find the lowest eigenpair by inflation dynamics.

    Iterates until ``mu <= tol`` or ``max_steps`` evaluations have been
    spent, and returns ``(EigenpairSet, Trace)``. The pair reported is the
    last evaluated point, so a start vector that is already an eigenvector
    converges at step 0 for the price of one matvec.
    """
    cfg = cfg or InflationConfig()
    if x0 is None:
        x0 = random_start(A.n, cfg.seed)
    ev = Evolution(A, x0, cfg, counter=counter)
    tol = cfg.tolerance(ev.bounds)
    converged = False
    while ev.step < max(cfg.max_steps, 1):
        ev.advance()
        if ev.mu <= tol:
            converged = True
            break
        if ev.step >= cfg.max_steps:
            break
    if ev.x_eval is None:
        raise InflationDiverged("no finite evaluation was produced")
    return _single_result(ev, converged), ev.trace


def fit_decay_rate(t, mu) -> float:
    """Least-squares slope of ``log(mu)`` against ``t`` (negative when
    ``mu`` decays). Non-positive and non-finite samples are skipped."""
    t = np.asarray(t, dtype=float)
    mu = np.asarray(mu, dtype=float)
    ok = np.isfinite(mu) & (mu > 0)
    if ok.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(t[ok], np.log(mu[ok]), 1)
    return float(slope)


def estimate_gap_scan(
    A: SparseSymMatrix,
    x0,
    candidates: Sequence[float],
    probe_steps: int = 30,
    *,
    burn_in: Optional[int] = None,
    cfg: Optional[InflationConfig] = None,
    floor: float = 1e-24,
    details: bool = False,
):
    """Pick the gap estimate whose border gives the steepest decay of ``mu``.

    After ``burn_in`` steps with the largest candidate (to wash out high
    modes), each candidate is probed for ``probe_steps`` from the same state
    and the decay rate of ``mu`` per unit time is fitted. Samples below
    ``floor`` times the starting ``mu`` are excluded from the fit. The
    first candidate wins ties. With ``details=True`` the fitted slopes are
    returned alongside the winner.
    """
    cands = [float(c) for c in candidates]
    if not cands:
        raise ValueError("need at least one gap candidate")
    if any(c < 0 for c in cands):
        raise ValueError("gap candidates must be >= 0")
    cfg = cfg or InflationConfig()
    if x0 is None:
        x0 = random_start(A.n, cfg.seed)
    burn_in = probe_steps if burn_in is None else burn_in
    base = Evolution(A, x0, cfg, offset=max(cands))
    for _ in range(burn_in):
        base.advance()
    start = base.state
    slopes = []
    for c in cands:
        ev = Evolution(A, start.x, cfg, offset=c, p0=start.p * np.linalg.norm(start.x))
        ev.dt = base.dt
        t, mus = [], []
        try:
            for _ in range(probe_steps):
                rec = ev.advance()
                t.append(rec.step * rec.dt)
                mus.append(rec.mu)
        except InflationDiverged:
            pass
        mus = np.asarray(mus)
        if mus.size and np.isfinite(mus[0]) and mus[0] > 0:
            keep = np.isfinite(mus) & (mus >= floor * mus[0])
            # stop at the first sample under the floor
            cut = int(np.argmin(keep)) if not keep.all() else keep.size
            slopes.append(fit_decay_rate(np.asarray(t)[:cut], mus[:cut]))
        else:
            slopes.append(math.nan)
    finite = [s for s in slopes if math.isfinite(s)]
    if len(cands) > 1 and (not finite or min(finite) >= 0):
        raise ScanFailed("mu grew for every candidate; try a smaller dt")
    if len(cands) == 1:
        best = 0
    else:
        best = min(
            (i for i, s in enumerate(slopes) if math.isfinite(s)), key=lambda i: (slopes[i], i)
        )
    if details:
        return cands[best], slopes
    return cands[best]


@dataclass
class NormalModeProjection:
    xi: np.ndarray
    pi: np.ndarray


def project_normal_modes(s: StateVector, eigenbasis, tol: float = 1e-10) -> NormalModeProjection:
    """Coordinates and momenta of ``s`` in an orthonormal eigenbasis
    (columns of ``eigenbasis``)."""
    V = np.asarray(eigenbasis, dtype=float)
    if V.ndim != 2 or V.shape[0] != s.x.size:
        raise ValueError("basis must be an n-by-k array of column vectors")
    if np.max(np.abs(V.T @ V - np.eye(V.shape[1]))) > tol:
        raise ValueError("basis is not orthonormal")
    return NormalModeProjection(V.T @ s.x, V.T @ s.p)
