"""Time-parameterized Dyson maps and everything derived from them.

A map Omega(t) = Omega_0 + sum_n v_n(t) Omega_n carries scalar coefficient
functions with analytic derivatives. From it follow the metric
Theta(t) = Omega^dag Omega, the Coriolis term Sigma(t) = i Omega^-1 dOmega/dt,
the dressed Hamiltonian H = Omega^-1 h Omega and the evolution generator
G = H - hbar * Sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import SingularMap
from .linalg import as_operator, dagger, fro


@dataclass(frozen=True)
class TimeFunction:
    """Real scalar function of time bundled with its derivative.

    ``numeric`` marks a finite-difference fallback derivative, accurate
    only to O(h_fd^2); analytic derivatives are exact.
    """

    value: Callable[[float], float]
    derivative: Callable[[float], float]
    numeric: bool = False

    def __call__(self, t: float) -> float:
        return float(self.value(t))

    def dot(self, t: float) -> float:
        return float(self.derivative(t))


def constant(c: float) -> TimeFunction:
    return TimeFunction(lambda t: c, lambda t: 0.0)


def polynomial(coeffs: Sequence[float]) -> TimeFunction:
    """Polynomial sum_k coeffs[k] * t**k with its exact derivative."""
    cs = [float(c) for c in coeffs]
    ds = [k * c for k, c in enumerate(cs)][1:]

    def val(t: float) -> float:
        return sum(c * t**k for k, c in enumerate(cs))

    def der(t: float) -> float:
        return sum(c * t**k for k, c in enumerate(ds))

    return TimeFunction(val, der)


def exponential(rate: float, amplitude: float = 1.0) -> TimeFunction:
    """amplitude * exp(rate * t)."""
    return TimeFunction(
        lambda t: amplitude * math.exp(rate * t),
        lambda t: amplitude * rate * math.exp(rate * t),
    )


def sine(omega: float, phase: float = 0.0, amplitude: float = 1.0) -> TimeFunction:
    """amplitude * sin(omega * t + phase)."""
    return TimeFunction(
        lambda t: amplitude * math.sin(omega * t + phase),
        lambda t: amplitude * omega * math.cos(omega * t + phase),
    )


def cosine(omega: float, phase: float = 0.0, amplitude: float = 1.0) -> TimeFunction:
    """amplitude * cos(omega * t + phase)."""
    return TimeFunction(
        lambda t: amplitude * math.cos(omega * t + phase),
        lambda t: -amplitude * omega * math.sin(omega * t + phase),
    )


def pwc_index(t: float, horizon: float, intervals: int) -> int:
    """Index of the uniform subinterval containing t.

    Intervals are right-open, the last one closed; t outside [0, horizon]
    clamps to the nearest end.
    """
    if t >= horizon:
        return intervals - 1
    if t <= 0.0:
        return 0
    return min(int(t * intervals / horizon), intervals - 1)


def piecewise_constant(amplitudes: Sequence[float], horizon: float) -> TimeFunction:
    """Piecewise-constant function on a uniform partition of [0, horizon]."""
    amps = np.asarray(amplitudes, dtype=float)
    m = amps.size
    if m < 1:
        raise ValueError("piecewise_constant needs at least one amplitude")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    return TimeFunction(
        lambda t: float(amps[pwc_index(t, horizon, m)]),
        lambda t: 0.0,
    )


def from_callable(value: Callable[[float], float], horizon: float = 1.0) -> TimeFunction:
    """Wrap a bare callable; derivative by central finite differences.

    The step is 1e-6 * max(horizon, 1); the result is flagged numeric.
    """
    h_fd = 1e-6 * max(horizon, 1.0)

    def der(t: float) -> float:
        return (value(t + h_fd) - value(t - h_fd)) / (2.0 * h_fd)

    return TimeFunction(value, der, numeric=True)


@dataclass(frozen=True)
class DysonMap:
    """Omega(t) = base + sum_n coeff_n(t) * op_n with an invertibility bound.

    The map must stay invertible wherever it is consumed; cond_max bounds
    the (Frobenius-estimated) condition number before SingularMap is raised.
    """

    base: np.ndarray
    terms: tuple[tuple[TimeFunction, np.ndarray], ...] = ()
    cond_max: float = 1e12

    def __post_init__(self):
        base = as_operator(self.base, "base")
        object.__setattr__(self, "base", base)
        checked = []
        for k, (coeff, op) in enumerate(self.terms):
            op = as_operator(op, f"term operator {k}")
            if op.shape != base.shape:
                raise ValueError(
                    f"term operator {k} has shape {op.shape}, base has {base.shape}"
                )
            if not isinstance(coeff, TimeFunction):
                raise TypeError(f"term coefficient {k} must be a TimeFunction")
            checked.append((coeff, op))
        object.__setattr__(self, "terms", tuple(checked))

    @property
    def dim(self) -> int:
        return self.base.shape[0]


def evaluate_map(m: DysonMap, t: float) -> np.ndarray:
    """Literal sum base + sum_n v_n(t) op_n (no invertibility check here)."""
    omega = m.base.copy()
    for coeff, op in m.terms:
        omega += coeff(t) * op
    return omega


def map_derivative(m: DysonMap, t: float) -> np.ndarray:
    """d/dt Omega(t) = sum_n dv_n/dt (t) op_n; the base contributes zero."""
    dot = np.zeros_like(m.base)
    for coeff, op in m.terms:
        dot += coeff.dot(t) * op
    return dot


def checked_inverse(omega: np.ndarray, cond_max: float, t: float | None = None) -> np.ndarray:
    """Inverse of omega, raising SingularMap past the condition bound.

    The condition number is estimated as ||omega||_F * ||omega^-1||_F,
    an upper bound on the 2-norm condition number.
    """
    try:
        inv = np.linalg.inv(omega)
    except np.linalg.LinAlgError as exc:
        where = "" if t is None else f" at t={t:g}"
        raise SingularMap(f"map is exactly singular{where}") from exc
    cond = fro(omega) * fro(inv)
    if not np.isfinite(cond) or cond > cond_max:
        where = "" if t is None else f" at t={t:g}"
        raise SingularMap(
            f"condition estimate {cond:.3e} exceeds cond_max {cond_max:.1e}{where}"
        )
    return inv


def metric_at(m: DysonMap, t: float) -> np.ndarray:
    """Theta(t) = Omega(t)^dagger Omega(t); Hermitian positive-definite."""
    omega = evaluate_map(m, t)
    checked_inverse(omega, m.cond_max, t)
    theta = dagger(omega) @ omega
    return (theta + dagger(theta)) / 2


def coriolis_at(m: DysonMap, t: float) -> np.ndarray:
    """Sigma(t) = i Omega^-1(t) dOmega/dt (t)."""
    omega = evaluate_map(m, t)
    inv = checked_inverse(omega, m.cond_max, t)
    return 1j * (inv @ map_derivative(m, t))


def dress_hamiltonian(h: np.ndarray, omega: np.ndarray, cond_max: float = 1e12) -> np.ndarray:
    """Similarity transform Omega^-1 h Omega (isospectral image of h)."""
    h = as_operator(h, "h")
    omega = as_operator(omega, "omega")
    inv = checked_inverse(omega, cond_max)
    return inv @ h @ omega


def generator_at(
    H_of_t: Callable[[float], np.ndarray],
    m: DysonMap,
    t: float,
    hbar: float = 1.0,
) -> np.ndarray:
    """Evolution generator G(t) = H(t) - hbar * Sigma(t).

    At the default hbar=1 this is H(t) minus the Coriolis term; the hbar
    factor keeps the P-space/THS equivalence exact for other unit choices.
    """
    omega = evaluate_map(m, t)
    inv = checked_inverse(omega, m.cond_max, t)
    sigma = 1j * (inv @ map_derivative(m, t))
    return np.asarray(H_of_t(t), dtype=complex) - hbar * sigma


def dressed_generator(
    h_of_t: Callable[[float], np.ndarray],
    m: DysonMap,
    hbar: float = 1.0,
) -> Callable[[float], np.ndarray]:
    """Closure t -> Omega^-1 h Omega - i hbar Omega^-1 dOmega/dt.

    The standard way to build the friendly-space generator from P-space
    data; shares one inverse per evaluation.
    """

    def G(t: float) -> np.ndarray:
        omega = evaluate_map(m, t)
        inv = checked_inverse(omega, m.cond_max, t)
        H = inv @ np.asarray(h_of_t(t), dtype=complex) @ omega
        sigma = 1j * (inv @ map_derivative(m, t))
        return H - hbar * sigma

    return G


def constant_map(omega: np.ndarray, cond_max: float = 1e12) -> DysonMap:
    """Time-independent map with the given matrix as base."""
    return DysonMap(base=omega, terms=(), cond_max=cond_max)
