"""Independent oracles used by the test suite.

These deliberately avoid the library's own code paths: the metric
null space is found by vectorizing the intertwining relation over an
orthonormal Hermitian basis, gradients come from the Frechet derivative
of the matrix exponential, and derivatives from central differences.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal basis of the real space of Hermitian n x n matrices."""
    basis = []
    for i in range(n):
        E = np.zeros((n, n), dtype=complex)
        E[i, i] = 1.0
        basis.append(E)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2)
            basis.append(E)
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = -1j / np.sqrt(2)
            E[j, i] = 1j / np.sqrt(2)
            basis.append(E)
    return basis


def metric_null_space(H: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Null space of Theta -> H^dag Theta - Theta H over Hermitian Theta.

    Returns the Hermitian basis and the null-space coefficient matrix
    (columns are admissible Theta coordinate vectors).
    """
    basis = hermitian_basis(H.shape[0])
    cols = []
    for E in basis:
        L = H.conj().T @ E - E @ H
        cols.append(np.concatenate([L.real.ravel(), L.imag.ravel()]))
    A = np.array(cols).T
    return basis, sla.null_space(A)


def hermitian_coords(theta: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    """Coordinates of a Hermitian matrix in the orthonormal basis."""
    return np.array([np.trace(E.conj().T @ theta).real for E in basis])


def null_space_distance(theta: np.ndarray, H: np.ndarray) -> float:
    """Distance of theta from the intertwining solution space (relative)."""
    basis, ns = metric_null_space(H)
    c = hermitian_coords(theta, basis)
    if ns.size == 0:
        return 1.0
    proj = ns @ (ns.T @ c)
    return float(np.linalg.norm(c - proj) / np.linalg.norm(c))


def fd_matrix_derivative(f, t: float, delta: float = 1e-6) -> np.ndarray:
    """Central-difference derivative of a matrix-valued function."""
    return (f(t + delta) - f(t - delta)) / (2.0 * delta)


def piecewise_expm_state(h0, h1, amplitudes, T, psi0, hbar=1.0):
    """Terminal state under h0 + u_k h1 via exact interval propagators."""
    m = len(amplitudes)
    dt = T / m
    psi = np.asarray(psi0, dtype=complex)
    for u in amplitudes:
        psi = sla.expm(-1j * (h0 + u * h1) * dt / hbar) @ psi
    return psi


def exact_fidelity_gradient(h0, h1, amplitudes, T, psi0, target, hbar=1.0):
    """Chain-rule gradient of the overlap fidelity through expm.

    Uses the Frechet derivative of the matrix exponential per interval;
    the figure of merit is |<target|psiT>|^2 / (<target|target><psiT|psiT>).
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    m = amplitudes.size
    dt = T / m
    psi0 = np.asarray(psi0, dtype=complex)
    target = np.asarray(target, dtype=complex)

    Us, Ls = [], []
    for u in amplitudes:
        A = -1j * (h0 + u * h1) * dt / hbar
        E = -1j * h1 * dt / hbar
        U, L = sla.expm_frechet(A, E)
        Us.append(U)
        Ls.append(L)

    before = [psi0]
    for U in Us:
        before.append(U @ before[-1])
    psiT = before[-1]
    suffix = [np.eye(h0.shape[0], dtype=complex)]
    for U in reversed(Us):
        suffix.insert(0, suffix[0] @ U)

    c = np.vdot(target, psiT)
    n_t = np.vdot(target, target).real
    n_T = np.vdot(psiT, psiT).real
    f = abs(c) ** 2 / (n_t * n_T)

    grad = np.zeros(m)
    for k in range(m):
        dpsi = suffix[k + 1] @ (Ls[k] @ before[k])
        dc = np.vdot(target, dpsi)
        dnT = 2.0 * np.real(np.vdot(psiT, dpsi))
        grad[k] = (2.0 * np.real(np.conj(c) * dc)) / (n_t * n_T) - f * dnT / n_T
    return f, grad
