"""Dense complex linear-algebra primitives shared by every other module.

Operators and kets are plain numpy arrays (complex128); the helpers here
validate shape/finiteness and provide the conjugation, eigen, exponential
and square-root machinery the physics layers are built on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateSpectrum,
    NonConvergence,
    NonHermitianInput,
    NotPositiveDefinite,
)

#: hard cap on the Hilbert-space dimension accepted by the eigensolver
MAX_DIM = 64

TOL_EIG = 1e-10
TOL_PD = 1e-10
TOL_DEGENERACY_REL = 1e-8


def as_operator(A, name: str = "operator") -> np.ndarray:
    """Validate and return A as a square, finite complex matrix."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"{name} must be a square N x N matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A.view(float))):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def as_state(v, name: str = "state") -> np.ndarray:
    """Validate and return v as a finite complex vector."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.size < 1:
        raise ValueError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(v.view(float))):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def dagger(A: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return A.conj().T


def fro(A: np.ndarray) -> float:
    """Frobenius norm (the residual norm used throughout)."""
    return float(np.linalg.norm(A, "fro"))


def hermitian_residual(A: np.ndarray) -> float:
    """Distance from Hermiticity, ||A - A^dagger||_F."""
    A = as_operator(A)
    return fro(A - dagger(A))


def is_hermitian(A: np.ndarray, rtol: float = TOL_EIG) -> bool:
    """True when A is Hermitian within rtol * ||A||_F (absolute for A ~ 0)."""
    nrm = fro(A)
    return hermitian_residual(A) <= rtol * max(nrm, 1e-300) or nrm == 0.0


@dataclass(frozen=True)
class EigenSystem:
    """Biorthonormalized eigensystem of a general complex matrix.

    Columns right[:, n] and left[:, n] satisfy A r = lam r and
    A^dagger l = conj(lam) l with left[:, n]^dagger @ right[:, n] = 1;
    right vectors carry unit Euclidean norm. Eigenvalues are sorted by
    ascending real part, ties by ascending imaginary part.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.size


def eig_general(
    A,
    tol_eig: float = TOL_EIG,
    tol_degeneracy: float | None = None,
) -> EigenSystem:
    """Full eigensystem of a general complex matrix with left eigenvectors.

    Raises DegenerateSpectrum when two eigenvalues are within
    tol_degeneracy (default 1e-8 * ||A||_F): the biorthonormal basis the
    metric construction relies on does not exist near degeneracies.
    Raises NonConvergence if LAPACK's QR iteration fails.
    """
    A = as_operator(A)
    n = A.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the configured maximum {MAX_DIM}")

    if tol_degeneracy is None:
        tol_degeneracy = TOL_DEGENERACY_REL * fro(A)

    try:
        w, vl, vr = sla.eig(A, left=True, right=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hard to trigger
        raise NonConvergence(f"eigensolver failed: {exc}") from exc

    order = np.lexsort((w.imag, w.real))
    w = w[order]
    vr = vr[:, order]
    vl = vl[:, order]

    if n > 1:
        gaps = np.abs(w[:, None] - w[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= tol_degeneracy:
            raise DegenerateSpectrum(
                f"minimum eigenvalue spacing {gaps.min():.3e} <= "
                f"tolerance {tol_degeneracy:.3e}"
            )

    # normalize: unit right vectors, left vectors rescaled so l^dag r = 1
    vr = vr / np.linalg.norm(vr, axis=0)
    overlaps = np.einsum("in,in->n", vl.conj(), vr)
    if np.any(np.abs(overlaps) < tol_eig):
        raise DegenerateSpectrum(
            "left/right eigenvector overlap below tolerance (near-defective matrix)"
        )
    vl = vl / overlaps.conj()

    return EigenSystem(eigenvalues=w, right=vr, left=vl)


def mat_exp(A) -> np.ndarray:
    """Matrix exponential e^A (Pade with scaling and squaring)."""
    A = as_operator(A)
    return sla.expm(A)


def herm_sqrt(theta, tol_pd: float = TOL_PD) -> np.ndarray:
    """Unique Hermitian positive-definite square root of a HPD matrix.

    Raises NonHermitianInput when theta is not Hermitian within
    tol_pd * ||theta||_F, NotPositiveDefinite when an eigenvalue
    falls at or below tol_pd.
    """
    theta = as_operator(theta, "theta")
    if hermitian_residual(theta) > tol_pd * max(fro(theta), 1e-300):
        raise NonHermitianInput(
            f"hermitian residual {hermitian_residual(theta):.3e} exceeds "
            f"{tol_pd:.1e} * ||theta||"
        )
    w, V = np.linalg.eigh((theta + dagger(theta)) / 2)
    if np.any(w <= tol_pd):
        raise NotPositiveDefinite(
            f"smallest eigenvalue {w.min():.3e} <= tol_pd {tol_pd:.1e}"
        )
    S = (V * np.sqrt(w)) @ dagger(V)
    return (S + dagger(S)) / 2
