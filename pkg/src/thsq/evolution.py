"""Time propagation in all three representations.

propagate_p   : textbook Hermitian evolution of the physical ket.
propagate_f   : exact stationary propagation under a constant generator.
propagate_ths : the coupled pair (ket under G, dual ket under G^dagger)
                whose pairing Re(dual^dag ket) is the conserved physical norm.
propagate_metric : the operator Cauchy problem i*hbar dTheta/dt = G^dag Theta - Theta G.

All ODE propagators use the classical fixed-step 4th-order Runge-Kutta
scheme; sample times land exactly on integrator nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    NonFiniteState,
    NonHermitianInput,
    NormDrift,
    NotPositiveDefinite,
    PositivityLoss,
)
from .linalg import as_operator, as_state, dagger, fro, mat_exp

log = logging.getLogger("thsq")

NORM_TOL = 1e-8
#: norm drift beyond FAIL_FACTOR * norm_tol raises NormDrift (grid too coarse)
FAIL_FACTOR = 100.0


@dataclass(frozen=True)
class TimeGrid:
    """Uniform integration grid with a uniform subset of stored samples.

    ``steps`` counts integrator steps on [t_start, t_end]; ``samples``
    stored points include both endpoints and must divide the step grid
    evenly ((samples-1) | steps), so every sample is an integrator node.
    """

    t_end: float
    steps: int
    samples: int | None = None
    t_start: float = 0.0

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.steps < 1:
            raise ValueError("steps must be a positive integer")
        samples = self.steps + 1 if self.samples is None else self.samples
        if samples < 2 or samples > self.steps + 1:
            raise ValueError("samples must lie in [2, steps + 1]")
        if self.steps % (samples - 1) != 0:
            raise ValueError(
                f"(samples - 1) = {samples - 1} must divide steps = {self.steps}"
            )
        object.__setattr__(self, "samples", samples)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.steps

    @property
    def stride(self) -> int:
        return self.steps // (self.samples - 1)

    @property
    def sample_times(self) -> np.ndarray:
        return self.t_start + self.dt * self.stride * np.arange(self.samples)

    def node(self, n: int) -> float:
        return self.t_start + n * self.dt

    def halved(self) -> "TimeGrid":
        """Same span and samples with half the steps (for order studies)."""
        if self.steps % 2 or (self.steps // 2) % (self.samples - 1):
            raise ValueError("step count cannot be halved on this grid")
        return TimeGrid(
            t_end=self.t_end,
            steps=self.steps // 2,
            samples=self.samples,
            t_start=self.t_start,
        )


@dataclass(frozen=True)
class StatePair:
    """Ket and its dual ket; their pairing is the physical norm."""

    ket: np.ndarray
    dual: np.ndarray

    def __post_init__(self):
        ket = as_state(self.ket, "ket")
        dual = as_state(self.dual, "dual")
        if ket.shape != dual.shape:
            raise ValueError("ket and dual must share dimension")
        object.__setattr__(self, "ket", ket)
        object.__setattr__(self, "dual", dual)

    @property
    def s_norm(self) -> float:
        return float(np.real(np.vdot(self.dual, self.ket)))

    @classmethod
    def from_metric(cls, ket, theta) -> "StatePair":
        """Pair with dual = Theta ket."""
        ket = as_state(ket)
        theta = as_operator(theta, "theta")
        return cls(ket=ket, dual=theta @ ket)


@dataclass
class Trajectory:
    """Sampled propagation result.

    kets/duals have shape (samples, N); s_norms[i] = Re(duals[i]^dag kets[i]).
    Metric-propagation mode fills ``metrics`` (samples, N, N) instead of
    the state arrays. ``meta`` carries integrator diagnostics.
    """

    times: np.ndarray
    kets: np.ndarray | None = None
    duals: np.ndarray | None = None
    s_norms: np.ndarray | None = None
    metrics: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def samples(self) -> int:
        return self.times.size

    def pair(self, i: int) -> StatePair:
        if self.kets is None:
            raise ValueError("trajectory carries no states")
        return StatePair(ket=self.kets[i], dual=self.duals[i])


def s_inner(phi, psi, theta) -> complex:
    """Metric-weighted inner product phi^dag Theta psi of the S space."""
    phi = as_state(phi, "phi")
    psi = as_state(psi, "psi")
    theta = as_operator(theta, "theta")
    if theta.shape[0] != phi.size or phi.size != psi.size:
        raise ValueError("dimension mismatch in s_inner")
    if fro(theta - dagger(theta)) > 1e-8 * max(fro(theta), 1e-300):
        raise ValueError("theta must be Hermitian")
    return complex(np.vdot(phi, theta @ psi))


def norm_drift(traj: Trajectory) -> float:
    """Relative drift max_t |s(t) - s(0)| / s(0) along a trajectory."""
    if traj.s_norms is None or traj.s_norms.size < 2:
        raise ValueError("trajectory needs at least two sampled norms")
    s = traj.s_norms
    if not s[0] > 0:
        raise ValueError("initial norm must be positive")
    return float(np.abs(s - s[0]).max() / s[0])


def _check_finite(vecs, t: float):
    for v in vecs:
        if not np.all(np.isfinite(v.view(float))):
            raise NonFiniteState(f"state overflowed at t={t:g}")


def propagate_p(
    h_of_t: Callable[[float], np.ndarray],
    psi0,
    grid: TimeGrid,
    hbar: float = 1.0,
    norm_tol: float = NORM_TOL,
    herm_tol: float = 1e-10,
) -> Trajectory:
    """Hermitian evolution i*hbar dpsi/dt = h(t) psi by fixed-step RK4.

    h(t) is checked for Hermiticity at every evaluated node
    (NonHermitianInput beyond herm_tol * ||h||); the Euclidean norm must
    stay within FAIL_FACTOR * norm_tol of its initial value (NormDrift).
    """
    psi0 = as_state(psi0, "psi0")
    n = psi0.size
    a = -1j / hbar
    h_step = grid.dt

    def h_at(t: float) -> np.ndarray:
        h = np.asarray(h_of_t(t), dtype=complex)
        if h.shape != (n, n):
            raise ValueError(f"h(t) has shape {h.shape}, expected {(n, n)}")
        res = fro(h - dagger(h))
        if res > herm_tol * max(fro(h), 1e-300):
            raise NonHermitianInput(
                f"h({t:g}) has hermitian residual {res:.3e} > {herm_tol:.1e} * ||h||"
            )
        return h

    kets = np.empty((grid.samples, n), dtype=complex)
    s_norms = np.empty(grid.samples)
    psi = psi0.copy()
    kets[0] = psi
    s_norms[0] = np.real(np.vdot(psi, psi))
    if not s_norms[0] > 0:
        raise ValueError("psi0 must have positive norm")

    h_left = h_at(grid.t_start)
    isample = 1
    for nstep in range(grid.steps):
        t = grid.node(nstep)
        h_mid = h_at(t + h_step / 2)
        h_right = h_at(t + h_step)
        k1 = a * (h_left @ psi)
        k2 = a * (h_mid @ (psi + (h_step / 2) * k1))
        k3 = a * (h_mid @ (psi + (h_step / 2) * k2))
        k4 = a * (h_right @ (psi + h_step * k3))
        psi = psi + (h_step / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        h_left = h_right
        if (nstep + 1) % grid.stride == 0:
            _check_finite([psi], t + h_step)
            kets[isample] = psi
            s_norms[isample] = np.real(np.vdot(psi, psi))
            isample += 1

    drift = np.abs(s_norms - s_norms[0]).max() / s_norms[0]
    if drift > FAIL_FACTOR * norm_tol:
        raise NormDrift(
            f"norm drift {drift:.3e} exceeds {FAIL_FACTOR:g} * norm_tol; "
            "the step grid is too coarse"
        )
    return Trajectory(
        times=grid.sample_times,
        kets=kets,
        duals=kets,
        s_norms=s_norms,
        meta={"mode": "p", "drift": float(drift)},
    )


def propagate_f(H, psi0, grid: TimeGrid, hbar: float = 1.0) -> Trajectory:
    """Stationary evolution psi(t) = exp(-i H (t - t0) / hbar) psi0.

    Exact propagator per stored sample (no integration error beyond the
    matrix exponential); H must be time-independent.
    """
    H = as_operator(H, "H")
    psi0 = as_state(psi0, "psi0")
    if H.shape[0] != psi0.size:
        raise ValueError("H and psi0 dimensions differ")

    dt_sample = grid.dt * grid.stride
    E = mat_exp(-1j * H * dt_sample / hbar)
    kets = np.empty((grid.samples, psi0.size), dtype=complex)
    s_norms = np.empty(grid.samples)
    psi = psi0.copy()
    for i in range(grid.samples):
        kets[i] = psi
        s_norms[i] = np.real(np.vdot(psi, psi))
        if i + 1 < grid.samples:
            psi = E @ psi
    return Trajectory(
        times=grid.sample_times,
        kets=kets,
        duals=kets,
        s_norms=s_norms,
        meta={"mode": "f"},
    )


def propagate_ths(
    G_of_t: Callable[[float], np.ndarray],
    pair0: StatePair,
    grid: TimeGrid,
    hbar: float = 1.0,
    norm_tol: float = NORM_TOL,
) -> Trajectory:
    """Co-integrate the two evolution equations of the pair.

    i*hbar d/dt ket  = G(t) ket
    i*hbar d/dt dual = G(t)^dagger dual

    This sign convention is the unique one conserving Re(dual^dag ket);
    the relative drift of that pairing beyond FAIL_FACTOR * norm_tol
    raises NormDrift, an overflow raises NonFiniteState.
    """
    n = pair0.ket.size
    s0 = pair0.s_norm
    if not s0 > 0:
        raise ValueError("initial pair must have positive s_norm")
    a = -1j / hbar
    h_step = grid.dt

    def G_at(t: float) -> np.ndarray:
        G = np.asarray(G_of_t(t), dtype=complex)
        if G.shape != (n, n):
            raise ValueError(f"G(t) has shape {G.shape}, expected {(n, n)}")
        return G

    kets = np.empty((grid.samples, n), dtype=complex)
    duals = np.empty((grid.samples, n), dtype=complex)
    s_norms = np.empty(grid.samples)
    ket = pair0.ket.copy()
    dual = pair0.dual.copy()
    kets[0], duals[0], s_norms[0] = ket, dual, s0

    G_left = G_at(grid.t_start)
    isample = 1
    half = h_step / 2
    for nstep in range(grid.steps):
        t = grid.node(nstep)
        G_mid = G_at(t + half)
        G_right = G_at(t + h_step)
        Gl_d, Gm_d, Gr_d = dagger(G_left), dagger(G_mid), dagger(G_right)

        k1 = a * (G_left @ ket)
        l1 = a * (Gl_d @ dual)
        k2 = a * (G_mid @ (ket + half * k1))
        l2 = a * (Gm_d @ (dual + half * l1))
        k3 = a * (G_mid @ (ket + half * k2))
        l3 = a * (Gm_d @ (dual + half * l2))
        k4 = a * (G_right @ (ket + h_step * k3))
        l4 = a * (Gr_d @ (dual + h_step * l3))

        ket = ket + (h_step / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        dual = dual + (h_step / 6) * (l1 + 2 * l2 + 2 * l3 + l4)
        G_left = G_right
        if (nstep + 1) % grid.stride == 0:
            _check_finite([ket, dual], t + h_step)
            kets[isample] = ket
            duals[isample] = dual
            s_norms[isample] = np.real(np.vdot(dual, ket))
            isample += 1

    drift = np.abs(s_norms - s0).max() / s0
    if drift > FAIL_FACTOR * norm_tol:
        raise NormDrift(
            f"S-norm drift {drift:.3e} exceeds {FAIL_FACTOR:g} * norm_tol; "
            "grid too coarse or dual ket inconsistent with the generator"
        )
    return Trajectory(
        times=grid.sample_times,
        kets=kets,
        duals=duals,
        s_norms=s_norms,
        meta={"mode": "ths", "drift": float(drift)},
    )


def propagate_metric(
    G_of_t: Callable[[float], np.ndarray],
    theta0,
    grid: TimeGrid,
    hbar: float = 1.0,
    tol_pd: float = 1e-10,
) -> Trajectory:
    """Metric Cauchy problem i*hbar dTheta/dt = G(t)^dag Theta - Theta G(t).

    Integrated by the same fixed-step RK4 scheme; the iterate is projected
    back onto the Hermitian manifold after each step ((Theta+Theta^dag)/2)
    and the largest projection is recorded in meta["max_resym"].
    PositivityLoss signals the smallest eigenvalue dropping below
    tol_pd * ||Theta(t)|| at a sample.
    """
    theta0 = as_operator(theta0, "theta0")
    if fro(theta0 - dagger(theta0)) > 1e-10 * max(fro(theta0), 1e-300):
        raise NonHermitianInput("theta0 must be Hermitian")
    if np.linalg.eigvalsh(theta0).min() <= tol_pd * fro(theta0):
        raise NotPositiveDefinite("theta0 must be positive-definite")
    n = theta0.shape[0]
    b = -1j / hbar
    h_step = grid.dt
    half = h_step / 2

    def G_at(t: float) -> np.ndarray:
        G = np.asarray(G_of_t(t), dtype=complex)
        if G.shape != (n, n):
            raise ValueError(f"G(t) has shape {G.shape}, expected {(n, n)}")
        return G

    def rhs(G: np.ndarray, G_d: np.ndarray, th: np.ndarray) -> np.ndarray:
        return b * (G_d @ th - th @ G)

    metrics = np.empty((grid.samples, n, n), dtype=complex)
    theta = theta0.copy()
    metrics[0] = theta
    max_resym = 0.0

    G_left = G_at(grid.t_start)
    isample = 1
    for nstep in range(grid.steps):
        t = grid.node(nstep)
        G_mid = G_at(t + half)
        G_right = G_at(t + h_step)
        Gl_d, Gm_d, Gr_d = dagger(G_left), dagger(G_mid), dagger(G_right)

        k1 = rhs(G_left, Gl_d, theta)
        k2 = rhs(G_mid, Gm_d, theta + half * k1)
        k3 = rhs(G_mid, Gm_d, theta + half * k2)
        k4 = rhs(G_right, Gr_d, theta + h_step * k3)
        theta = theta + (h_step / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

        asym = fro(theta - dagger(theta)) / 2
        if asym > max_resym:
            max_resym = asym
        theta = (theta + dagger(theta)) / 2
        G_left = G_right

        if (nstep + 1) % grid.stride == 0:
            if not np.all(np.isfinite(theta.view(float))):
                raise NonFiniteState(f"metric overflowed at t={t + h_step:g}")
            w_min = np.linalg.eigvalsh(theta).min()
            if w_min < tol_pd * fro(theta):
                raise PositivityLoss(
                    f"min eigenvalue {w_min:.3e} at t={t + h_step:g} below "
                    f"tol_pd * ||Theta||; generator incompatible with a "
                    "unitary S-space evolution from theta0"
                )
            metrics[isample] = theta
            isample += 1

    log.debug("metric propagation: max hermitian projection %.3e", max_resym)
    return Trajectory(
        times=grid.sample_times,
        metrics=metrics,
        meta={"mode": "metric", "max_resym": float(max_resym)},
    )
