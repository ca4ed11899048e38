"""Bilinear quantum-control layer.

Generator assembly for the three ansatz kinds (Hermitian P-space
Hamiltonian, evolution generator, observable Hamiltonian), Lie-algebra
controllability rank, metric-weighted fidelity, piecewise-constant field
optimization, and the single-term toy-model builder whose metric is
Theta(t) = v(t)^2 Theta_1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import dyson
from .dyson import DysonMap, TimeFunction, pwc_index
from .errors import (
    ConditionsViolated,
    CountMismatch,
    DegenerateState,
    NoImprovement,
    NonFiniteState,
    NonHermitianInput,
    NormDrift,
)
from .evolution import StatePair, TimeGrid, Trajectory, propagate_ths, s_inner
from .linalg import as_operator, as_state, fro, herm_sqrt, hermitian_residual, mat_exp
from .metric import elementwise_conditions

KINDS = ("hermitian", "generator", "observable")

#: merged piecewise partitions beyond this size fall back to generic RK4
MAX_SEGMENTS = 4096


@dataclass(frozen=True)
class ControlField:
    """Piecewise-constant real field on a uniform partition of [0, horizon].

    Evaluation uses right-open subintervals, the last one closed;
    amplitudes are bounded by |u| <= u_max.
    """

    horizon: float
    amplitudes: np.ndarray
    u_max: float = 10.0

    def __post_init__(self):
        amps = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        if amps.ndim != 1 or amps.size < 1:
            raise ValueError("amplitudes must be a non-empty 1-d real array")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if np.any(np.abs(amps) > self.u_max):
            raise ValueError(
                f"amplitude bound violated: max |u| = {np.abs(amps).max():g} "
                f"> u_max = {self.u_max:g}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def intervals(self) -> int:
        return self.amplitudes.size

    def __call__(self, t: float) -> float:
        return float(self.amplitudes[pwc_index(t, self.horizon, self.intervals)])

    def as_time_function(self) -> TimeFunction:
        return dyson.piecewise_constant(self.amplitudes, self.horizon)

    def with_amplitudes(self, amps) -> "ControlField":
        return replace(self, amplitudes=np.asarray(amps, dtype=float))


@dataclass(frozen=True)
class BilinearSystem:
    """Drift plus control operators with the ansatz kind.

    kind "hermitian"  : textbook P-space Hamiltonian superposition
                        (every operator must be Hermitian),
    kind "generator"  : the superposition IS the evolution generator
                        (complex spectrum allowed, no constraint),
    kind "observable" : the superposition is the instantaneous-energy
                        operator; all terms must intertwine with the
                        supplied theta1 (real-spectrum guarantee).
    """

    drift: np.ndarray
    controls: tuple[np.ndarray, ...]
    kind: str = "hermitian"
    theta1: np.ndarray | None = None

    def __post_init__(self):
        drift = as_operator(self.drift, "drift")
        controls = tuple(
            as_operator(c, f"control {k}") for k, c in enumerate(self.controls)
        )
        for k, c in enumerate(controls):
            if c.shape != drift.shape:
                raise ValueError(f"control {k} shape {c.shape} != drift {drift.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "hermitian":
            for name, op in [("drift", drift)] + [
                (f"control {k}", c) for k, c in enumerate(controls)
            ]:
                if hermitian_residual(op) > 1e-10 * max(fro(op), 1e-300):
                    raise NonHermitianInput(
                        f"{name} must be Hermitian for kind 'hermitian'"
                    )
        theta1 = self.theta1
        if self.kind == "observable":
            if theta1 is None:
                raise ValueError("kind 'observable' requires theta1")
            theta1 = as_operator(theta1, "theta1")
            residuals = elementwise_conditions([drift, *controls], theta1)
            if max(residuals) > 1e-8:
                raise ConditionsViolated(
                    f"operator family fails the intertwining conditions against "
                    f"theta1 (max residual {max(residuals):.3e} > 1e-08)"
                )
        elif theta1 is not None:
            theta1 = as_operator(theta1, "theta1")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        object.__setattr__(self, "theta1", theta1)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]


def assemble(system: BilinearSystem, fields: Sequence[ControlField], t: float) -> np.ndarray:
    """drift + sum_k u_k(t) control_k."""
    if len(fields) != len(system.controls):
        raise CountMismatch(
            f"{len(fields)} fields for {len(system.controls)} control operators"
        )
    horizons = {round(f.horizon, 12) for f in fields}
    if len(horizons) > 1:
        raise CountMismatch(f"field horizons disagree: {sorted(horizons)}")
    out = system.drift.astype(complex, copy=True)
    for u, op in zip(fields, system.controls):
        out += u(t) * op
    return out


def lie_rank(generators: Sequence[np.ndarray], tol: float = 1e-9) -> int:
    """Dimension of the real Lie algebra generated by the given matrices.

    Closes the real linear span under iterated commutators; for Hermitian
    traceless drift + controls (passed as i*op), rank N^2 - 1 certifies
    controllability on the special unitary group. Scale- and
    permutation-invariant: candidates are normalized before the rank test.
    """
    mats = [as_operator(g, f"generator {k}") for k, g in enumerate(generators)]
    if not mats:
        return 0
    n = mats[0].shape[0]
    for k, m in enumerate(mats):
        if m.shape != (n, n):
            raise ValueError(f"generator {k} has mismatched shape {m.shape}")
    ambient = 2 * n * n

    basis_vecs: list[np.ndarray] = []
    basis_mats: list[np.ndarray] = []

    def try_add(M: np.ndarray) -> bool:
        nrm = fro(M)
        if nrm < 1e-300:
            return False
        M = M / nrm
        v = np.concatenate([M.real.ravel(), M.imag.ravel()])
        for b in basis_vecs:  # orthogonalize twice for numerical safety
            v = v - (b @ v) * b
        for b in basis_vecs:
            v = v - (b @ v) * b
        r = np.linalg.norm(v)
        if r <= tol:
            return False
        basis_vecs.append(v / r)
        basis_mats.append(M)
        return True

    frontier = [M for M in mats if try_add(M)]
    rounds = 0
    while frontier and rounds < ambient * ambient:
        rounds += 1
        fresh: list[np.ndarray] = []
        for X in frontier:
            for Y in list(basis_mats):
                C = X @ Y - Y @ X
                if try_add(C):
                    fresh.append(basis_mats[-1])
                if len(basis_mats) >= ambient:
                    return len(basis_mats)
        frontier = fresh
    return len(basis_vecs)


def fidelity(psiT, target, theta, tol: float = 1e-12) -> float:
    """Normalized metric-weighted overlap squared, in [0, 1].

    |<target|psiT>_Theta|^2 / (<target|target>_Theta <psiT|psiT>_Theta);
    DegenerateState if either metric norm is at or below tol.
    """
    psiT = as_state(psiT, "psiT")
    target = as_state(target, "target")
    n_t = float(np.real(s_inner(target, target, theta)))
    n_p = float(np.real(s_inner(psiT, psiT, theta)))
    if n_t <= tol or n_p <= tol:
        raise DegenerateState(
            f"metric norms ({n_t:.3e}, {n_p:.3e}) too small for a fidelity"
        )
    overlap = s_inner(target, psiT, theta)
    return float(abs(overlap) ** 2 / (n_t * n_p))


@dataclass
class OptimizerOptions:
    """Knobs for the fidelity ascent."""

    max_iters: int = 200
    learning_rate: float = 10.0
    fd_step: float = 1e-6
    stop_tol: float = 1e-10
    target_fidelity: float | None = None
    intervals: int = 20  # used when no guess fields are supplied
    u_max: float = 10.0
    guess: tuple[ControlField, ...] | None = None
    max_backtracks: int = 40


@dataclass
class ControlProblem:
    """A complete steering task: system + states + grid + optimizer knobs.

    ``map`` supplies the Coriolis term (kind 'observable') and the
    time-dependent metric for the physical inner product.
    ``stationary_intervals`` declares that all map-derived terms are
    constant on a uniform partition with that many intervals (set by the
    toy-model builder), enabling exact piecewise propagation.
    """

    system: BilinearSystem
    initial: np.ndarray
    target: np.ndarray
    grid: TimeGrid
    map: DysonMap | None = None
    hbar: float = 1.0
    options: OptimizerOptions = field(default_factory=OptimizerOptions)
    stationary_intervals: int | None = None

    def __post_init__(self):
        self.initial = as_state(self.initial, "initial")
        self.target = as_state(self.target, "target")
        n = self.system.dim
        if self.initial.size != n or self.target.size != n:
            raise ValueError("initial/target dimension does not match the system")
        if self.grid.t_start != 0.0:
            raise ValueError("control problems require grids starting at t = 0")
        if self.system.kind == "hermitian" and self.map is not None:
            raise ValueError("kind 'hermitian' lives in P space; no map allowed")
        if self.map is not None and self.map.dim != n:
            raise ValueError("map dimension does not match the system")

    @property
    def duration(self) -> float:
        return self.grid.t_end - self.grid.t_start

    def theta_at(self, t: float) -> np.ndarray:
        if self.map is not None:
            return dyson.metric_at(self.map, t)
        if self.system.theta1 is not None:
            return self.system.theta1
        return np.eye(self.system.dim, dtype=complex)

    def generator_value(self, fields: Sequence[ControlField], t: float) -> np.ndarray:
        """G(t) for the given fields under this problem's ansatz kind."""
        A = assemble(self.system, fields, t)
        if self.system.kind == "observable" and self.map is not None:
            A = A - self.hbar * dyson.coriolis_at(self.map, t)
        return A

    def generator_of(self, fields: Sequence[ControlField]) -> Callable[[float], np.ndarray]:
        return lambda t: self.generator_value(fields, t)


def _zero_guess(problem: ControlProblem) -> tuple[ControlField, ...]:
    opts = problem.options
    zeros = np.zeros(opts.intervals)
    return tuple(
        ControlField(horizon=problem.duration, amplitudes=zeros, u_max=opts.u_max)
        for _ in problem.system.controls
    )


def _merged_partition(problem: ControlProblem, fields: Sequence[ControlField]) -> int:
    m = 1
    for f in fields:
        m = math.lcm(m, f.intervals)
    if problem.map is not None and problem.stationary_intervals:
        m = math.lcm(m, problem.stationary_intervals)
    return m


def _piecewise_stationary(problem: ControlProblem, fields) -> bool:
    if problem.map is not None and problem.stationary_intervals is None:
        return False
    return _merged_partition(problem, fields) <= MAX_SEGMENTS


class _ExactObjective:
    """Terminal fidelity via exact expm propagators per constant segment.

    Valid when the generator is constant on each merged subinterval;
    caches prefix states and suffix matrices so the finite-difference
    gradient costs two expm evaluations per segment instead of two full
    re-propagations per parameter.
    """

    def __init__(self, problem: ControlProblem, fields: Sequence[ControlField]):
        self.problem = problem
        self.mstar = _merged_partition(problem, fields)
        self.delta = problem.duration / self.mstar
        self.mids = (np.arange(self.mstar) + 0.5) * self.delta
        self.theta_T = problem.theta_at(problem.grid.t_end)
        self._a = -1j * self.delta / problem.hbar

    def _prop(self, fields, k: int) -> np.ndarray:
        return mat_exp(self._a * self.problem.generator_value(fields, self.mids[k]))

    def value(self, fields) -> float:
        psi = self.problem.initial
        for k in range(self.mstar):
            psi = self._prop(fields, k) @ psi
        return fidelity(psi, self.problem.target, self.theta_T)

    def value_and_gradient(self, fields) -> tuple[float, list[np.ndarray]]:
        m = self.mstar
        n = self.problem.system.dim
        props = [self._prop(fields, k) for k in range(m)]

        before = np.empty((m + 1, n), dtype=complex)
        before[0] = self.problem.initial
        for k in range(m):
            before[k + 1] = props[k] @ before[k]
        suffix = np.empty((m + 1, n, n), dtype=complex)
        suffix[m] = np.eye(n)
        for k in range(m - 1, -1, -1):
            suffix[k] = suffix[k + 1] @ props[k]

        f0 = fidelity(before[m], self.problem.target, self.theta_T)

        h = self.problem.options.fd_step
        fields = list(fields)
        grads: list[np.ndarray] = []
        for fi, fld in enumerate(fields):
            per = m // fld.intervals
            g = np.zeros(fld.intervals)
            for j in range(fld.intervals):
                a, b = j * per, (j + 1) * per  # affected segments [a, b)
                vals = []
                for sign in (+1.0, -1.0):
                    amps = fld.amplitudes.copy()
                    amps[j] += sign * h
                    probe = ControlField(fld.horizon, amps, u_max=math.inf)
                    trial = fields.copy()
                    trial[fi] = probe
                    psi = before[a].copy()
                    for k in range(a, b):
                        psi = self._prop(trial, k) @ psi
                    psiT = suffix[b] @ psi
                    vals.append(fidelity(psiT, self.problem.target, self.theta_T))
                g[j] = (vals[0] - vals[1]) / (2.0 * h)
            grads.append(g)
        return f0, grads


class _Rk4Objective:
    """Fallback objective when the map is genuinely time-dependent.

    Every evaluation re-propagates the pair with the generic RK4
    integrator; failures during exploratory steps count as fidelity -1
    so backtracking steers away from them.
    """

    def __init__(self, problem: ControlProblem, fields: Sequence[ControlField]):
        self.problem = problem
        self.theta_T = problem.theta_at(problem.grid.t_end)
        theta0 = problem.theta_at(problem.grid.t_start)
        self.pair0 = StatePair.from_metric(problem.initial, theta0)

    def value(self, fields) -> float:
        try:
            traj = propagate_ths(
                self.problem.generator_of(fields),
                self.pair0,
                self.problem.grid,
                hbar=self.problem.hbar,
            )
        except (NormDrift, NonFiniteState):
            return -1.0
        return fidelity(traj.kets[-1], self.problem.target, self.theta_T)

    def value_and_gradient(self, fields) -> tuple[float, list[np.ndarray]]:
        f0 = self.value(fields)
        h = self.problem.options.fd_step
        fields = list(fields)
        grads: list[np.ndarray] = []
        for fi, fld in enumerate(fields):
            g = np.zeros(fld.intervals)
            for j in range(fld.intervals):
                vals = []
                for sign in (+1.0, -1.0):
                    amps = fld.amplitudes.copy()
                    amps[j] += sign * h
                    trial = fields.copy()
                    trial[fi] = ControlField(fld.horizon, amps, u_max=math.inf)
                    vals.append(self.value(trial))
                g[j] = (vals[0] - vals[1]) / (2.0 * h)
            grads.append(g)
        return f0, grads


def optimize(problem: ControlProblem) -> tuple[tuple[ControlField, ...], list[float]]:
    """Gradient ascent on the terminal fidelity over all field amplitudes.

    Central finite differences through the full state propagation give the
    gradient; a backtracking line search keeps the per-iteration history
    monotonically non-decreasing. Amplitudes stay clipped to each field's
    u_max box. Terminates at max_iters, when the improvement falls below
    stop_tol, or when target_fidelity is reached.

    Raises NoImprovement when the first 10 iterations produce no ascent
    direction at all (flat landscape at the initial guess).
    """
    opts = problem.options
    fields = tuple(opts.guess) if opts.guess is not None else _zero_guess(problem)
    if len(fields) != len(problem.system.controls):
        raise CountMismatch(
            f"{len(fields)} guess fields for {len(problem.system.controls)} controls"
        )

    theta0 = problem.theta_at(problem.grid.t_start)
    theta_T = problem.theta_at(problem.grid.t_end)
    s_i = float(np.real(s_inner(problem.initial, problem.initial, theta0)))
    s_t = float(np.real(s_inner(problem.target, problem.target, theta_T)))
    if s_i <= 0 or s_t <= 0:
        raise DegenerateState("initial/target state has non-positive metric norm")

    if problem.system.kind == "hermitian":
        gens = [1j * problem.system.drift] + [1j * c for c in problem.system.controls]
        rank = lie_rank(gens)
        full = problem.system.dim**2 - 1
        if rank < full:
            warnings.warn(
                f"Lie-algebra rank {rank} < {full}: the system may not be "
                "controllable on the special unitary group",
                RuntimeWarning,
                stacklevel=2,
            )

    if _piecewise_stationary(problem, fields):
        objective = _ExactObjective(problem, fields)
    else:
        objective = _Rk4Objective(problem, fields)

    f_cur = objective.value(fields)
    history = [f_cur]
    progressed = False
    failures = 0

    for _ in range(opts.max_iters):
        if opts.target_fidelity is not None and f_cur >= opts.target_fidelity:
            break
        if f_cur >= 1.0 - opts.stop_tol:
            break

        f_base, grads = objective.value_and_gradient(fields)
        gnorm = math.sqrt(sum(float(g @ g) for g in grads))
        accepted = False
        if gnorm > 0.0:
            alpha = opts.learning_rate
            for _bt in range(opts.max_backtracks):
                trial = tuple(
                    fld.with_amplitudes(
                        np.clip(fld.amplitudes + alpha * g, -fld.u_max, fld.u_max)
                    )
                    for fld, g in zip(fields, grads)
                )
                f_trial = objective.value(trial)
                if f_trial > f_cur:
                    improvement = f_trial - f_cur
                    fields, f_cur = trial, f_trial
                    history.append(f_cur)
                    accepted = True
                    progressed = True
                    break
                alpha *= 0.5
            if accepted and improvement < opts.stop_tol:
                break

        if not accepted:
            failures += 1
            if not progressed and failures >= 10:
                raise NoImprovement(
                    "no ascent direction in the first 10 iterations; the "
                    "fidelity landscape is flat at the initial guess"
                )
            if progressed:
                break  # converged: no further ascent available

    return fields, history


def evaluate_problem(
    problem: ControlProblem,
    fields: Sequence[ControlField],
    norm_tol: float = 1e-8,
) -> tuple[float, Trajectory]:
    """Propagate the pair under the given fields and report (fidelity, trajectory).

    Runs propagate_ths segment by segment on the merged piecewise
    partition, freezing the field amplitudes inside each segment so the
    integrator never straddles a control discontinuity.
    """
    fields = tuple(fields)
    theta0 = problem.theta_at(problem.grid.t_start)
    pair = StatePair.from_metric(problem.initial, theta0)

    mstar = _merged_partition(problem, fields)
    if mstar > MAX_SEGMENTS:
        raise ValueError(f"merged partition {mstar} too fine (> {MAX_SEGMENTS})")
    steps_seg = max(1, math.ceil(problem.grid.steps / mstar))
    width = problem.duration / mstar
    stationary = _piecewise_stationary(problem, fields)

    times: list[np.ndarray] = []
    kets: list[np.ndarray] = []
    duals: list[np.ndarray] = []
    s_norms: list[np.ndarray] = []
    for k in range(mstar):
        t_lo = problem.grid.t_start + k * width
        t_hi = problem.grid.t_start + (k + 1) * width
        t_mid = 0.5 * (t_lo + t_hi)
        if stationary:
            G_const = problem.generator_value(fields, t_mid)
            G_of_t = lambda t, _G=G_const: _G
        else:
            frozen = tuple(
                ControlField(f.horizon, np.full(1, f(t_mid)), u_max=math.inf)
                for f in fields
            )
            G_of_t = problem.generator_of(frozen)
        seg_grid = TimeGrid(t_start=t_lo, t_end=t_hi, steps=steps_seg)
        traj = propagate_ths(G_of_t, pair, seg_grid, hbar=problem.hbar, norm_tol=norm_tol)
        lo = 0 if k == 0 else 1  # junction sample already stored
        times.append(traj.times[lo:])
        kets.append(traj.kets[lo:])
        duals.append(traj.duals[lo:])
        s_norms.append(traj.s_norms[lo:])
        pair = StatePair(ket=traj.kets[-1], dual=traj.duals[-1])

    s_all = np.concatenate(s_norms)
    drift = float(np.abs(s_all - s_all[0]).max() / s_all[0])
    if drift > 100.0 * norm_tol:
        raise NormDrift(f"S-norm drift {drift:.3e} over the chained trajectory")
    traj = Trajectory(
        times=np.concatenate(times),
        kets=np.concatenate(kets),
        duals=np.concatenate(duals),
        s_norms=s_all,
        meta={"mode": "ths", "drift": drift, "segments": mstar},
    )
    fid = fidelity(traj.kets[-1], problem.target, problem.theta_at(problem.grid.t_end))
    return fid, traj


@dataclass(frozen=True)
class ToyModel:
    """Single-term map model: Omega(t) = v(t) Theta_1^(1/2).

    The metric collapses to Theta(t) = v(t)^2 Theta_1 and the Coriolis
    term to the scalar -i w(t) I with w = -dv/dt / v, so the full
    generator is drift + u(t) control + i hbar w(t) I.
    """

    system: BilinearSystem
    w: ControlField
    dyson_map: DysonMap
    v0: float = 1.0

    @property
    def theta1(self) -> np.ndarray:
        return self.system.theta1

    def v(self, t: float) -> float:
        return float(self.dyson_map.terms[0][0](t))

    def metric(self, t: float) -> np.ndarray:
        return self.v(t) ** 2 * self.theta1

    def generator(self, fields: Sequence[ControlField], t: float, hbar: float = 1.0) -> np.ndarray:
        A = assemble(self.system, fields, t)
        return A - hbar * dyson.coriolis_at(self.dyson_map, t)

    def problem(
        self,
        initial,
        target,
        grid: TimeGrid,
        options: OptimizerOptions | None = None,
        hbar: float = 1.0,
    ) -> ControlProblem:
        return ControlProblem(
            system=self.system,
            initial=initial,
            target=target,
            grid=grid,
            map=self.dyson_map,
            hbar=hbar,
            options=options or OptimizerOptions(),
            stationary_intervals=self.w.intervals,
        )


def build_toy_model(
    H0,
    H1,
    theta1,
    w: ControlField,
    v0: float = 1.0,
    condition_tol: float = 1e-8,
) -> ToyModel:
    """Assemble the single-term-map control model from its ingredients.

    Checks the two intertwining conditions on (H0, H1) against theta1
    (ConditionsViolated past condition_tol), then returns the generator
    family G(t) = H0 + u(t) H1 + i w(t) I together with the closed-form
    coefficient v(t) = v0 * exp(-int_0^t w) and the matching Dyson map
    Omega(t) = v(t) * theta1^(1/2).
    """
    H0 = as_operator(H0, "H0")
    H1 = as_operator(H1, "H1")
    theta1 = as_operator(theta1, "theta1")
    residuals = elementwise_conditions([H0, H1], theta1)
    if max(residuals) > condition_tol:
        raise ConditionsViolated(
            f"intertwining residuals {[f'{r:.3e}' for r in residuals]} exceed "
            f"{condition_tol:.1e}"
        )
    if v0 <= 0:
        raise ValueError("v0 must be positive")

    sqrt_theta = herm_sqrt(theta1)

    # closed-form running integral of the piecewise-constant w
    amps = w.amplitudes
    dw = w.horizon / w.intervals
    cum = np.concatenate([[0.0], np.cumsum(amps) * dw])

    def w_integral(t: float) -> float:
        k = pwc_index(t, w.horizon, w.intervals)
        return float(cum[k] + amps[k] * (t - k * dw))

    def v_val(t: float) -> float:
        return v0 * math.exp(-w_integral(t))

    v_tf = TimeFunction(v_val, lambda t: -w(t) * v_val(t))
    dmap = DysonMap(base=np.zeros_like(sqrt_theta), terms=((v_tf, sqrt_theta),))
    system = BilinearSystem(drift=H0, controls=(H1,), kind="observable", theta1=theta1)
    return ToyModel(system=system, w=w, dyson_map=dmap, v0=v0)
