import numpy as np
import pytest

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

#: the worked 2x2 quasi-Hermitian example used across the suite
H_QH = np.array([[0, 2], [0.5, 0]], dtype=complex)
THETA_QH = np.diag([1.0, 4.0]).astype(complex)


def random_hermitian(rng, n, scale=1.0):
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (B + B.conj().T) / 2


def random_invertible(rng, n, spread=1.0):
    """Random matrix pushed away from singularity via its singular values."""
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    U, s, Vh = np.linalg.svd(B)
    s = spread * (0.5 + s / s.max())
    return (U * s) @ Vh


def random_state(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
