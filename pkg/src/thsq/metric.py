"""Inverse direction: construct metrics for a given non-Hermitian operator.

Given H with a real, nondegenerate spectrum, every positive weight vector
kappa yields a Hermitian positive-definite Theta = sum_n kappa_n l_n l_n^dag
(l_n the unit-normalized left eigenvectors) satisfying the intertwining
relation H^dag Theta = Theta H. The weight freedom is the well-known
metric ambiguity; this module exposes the whole family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyson import DysonMap, constant_map
from .errors import ComplexSpectrum
from .linalg import as_operator, dagger, eig_general, fro, herm_sqrt


@dataclass(frozen=True)
class MetricCandidate:
    """One member of the weight family, with its certificates."""

    theta: np.ndarray
    weights: np.ndarray
    residual: float  # ||H^dag Theta - Theta H||_F for the generating H
    min_eig: float


def dieudonne_residual(H, theta) -> float:
    """||H^dag Theta - Theta H||_F; zero iff H is quasi-Hermitian wrt Theta."""
    H = as_operator(H, "H")
    theta = as_operator(theta, "theta")
    if H.shape != theta.shape:
        raise ValueError(f"shape mismatch: H {H.shape} vs theta {theta.shape}")
    return fro(dagger(H) @ theta - theta @ H)


def solve_metric(H, weights=None, tol_real: float | None = None) -> MetricCandidate:
    """Positive-definite metric for H from its left eigenvectors.

    Parameters
    ----------
    H : array
        Diagonalizable matrix with real, nondegenerate spectrum.
    weights : array, optional
        Positive family parameters kappa_n, one per eigenvalue
        (all ones by default).
    tol_real : float, optional
        Bound on |Im lambda| before ComplexSpectrum is raised;
        defaults to 1e-9 * ||H||_F.

    Raises
    ------
    ComplexSpectrum
        Some eigenvalue has an imaginary part beyond tol_real; no
        positive-definite metric exists for such H.
    DegenerateSpectrum
        Propagated from the eigensolver.
    """
    H = as_operator(H, "H")
    n = H.shape[0]
    if tol_real is None:
        tol_real = 1e-9 * fro(H)
    if weights is None:
        weights = np.ones(n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,) or np.any(weights <= 0):
        raise ValueError("weights must be N positive reals")

    system = eig_general(H)
    worst = float(np.abs(system.eigenvalues.imag).max())
    if worst > tol_real:
        raise ComplexSpectrum(
            f"max |Im eigenvalue| = {worst:.3e} exceeds tol_real {tol_real:.3e}"
        )

    left = system.left / np.linalg.norm(system.left, axis=0)
    theta = (left * weights) @ dagger(left)
    theta = (theta + dagger(theta)) / 2

    residual = dieudonne_residual(H, theta)
    min_eig = float(np.linalg.eigvalsh(theta).min())
    return MetricCandidate(theta=theta, weights=weights, residual=residual, min_eig=min_eig)


def factor_metric(theta, tol_pd: float = 1e-10, cond_max: float = 1e12) -> DysonMap:
    """Constant Dyson map from the Hermitian positive root Omega = Theta^(1/2)."""
    return constant_map(herm_sqrt(theta, tol_pd=tol_pd), cond_max=cond_max)


def elementwise_conditions(ops, theta1) -> list[float]:
    """Intertwining residual of each operator against one shared metric.

    For H(t) = H_0 + z(t) H_1 with real z the time-dependent relation
    H(t)^dag Theta_1 = Theta_1 H(t) holds for all t iff every returned
    residual vanishes.
    """
    theta1 = as_operator(theta1, "theta1")
    return [dieudonne_residual(op, theta1) for op in ops]
