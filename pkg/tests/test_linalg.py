import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import SX, SZ, random_hermitian, random_invertible
from thsq.errors import DegenerateSpectrum, NonHermitianInput, NotPositiveDefinite
from thsq.linalg import (
    as_operator,
    as_state,
    eig_general,
    fro,
    herm_sqrt,
    hermitian_residual,
    mat_exp,
)


class TestValidation:
    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            as_operator(np.ones((2, 3)))

    def test_rejects_nan(self):
        A = np.eye(2, dtype=complex)
        A[0, 1] = np.nan
        with pytest.raises(ValueError):
            as_operator(A)
        with pytest.raises(ValueError):
            as_state(np.array([1.0, np.inf]))

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            eig_general(np.eye(65))


class TestHermitianResidual:
    def test_real_symmetric_is_zero(self):
        assert hermitian_residual(SX) == 0.0

    def test_worked_two_by_two(self):
        # difference [[0, 1.5], [-1.5, 0]] has Frobenius norm 1.5*sqrt(2)
        A = np.array([[0, 2], [0.5, 0]], dtype=complex)
        assert_allclose(hermitian_residual(A), 1.5 * np.sqrt(2), rtol=1e-14)

    def test_anti_hermitian_identity(self):
        # iI - (iI)^dag = 2iI, norm 2*sqrt(2) at N=2
        assert_allclose(hermitian_residual(1j * np.eye(2)), 2 * np.sqrt(2), rtol=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_hermitian_by_construction(self, seed):
        rng = np.random.default_rng(seed)
        A = random_hermitian(rng, 6)
        assert hermitian_residual(A) <= 1e-13 * fro(A)


class TestEigGeneral:
    def test_diagonal(self):
        es = eig_general(np.diag([1.0, 2.0]))
        assert_allclose(es.eigenvalues, [1.0, 2.0], atol=1e-14)
        assert_allclose(np.abs(es.right), np.eye(2), atol=1e-14)

    def test_quasi_hermitian_spectrum(self):
        # characteristic polynomial lambda^2 - 1 = 0
        es = eig_general(np.array([[0, 2], [0.5, 0]], dtype=complex))
        assert_allclose(es.eigenvalues, [-1.0, 1.0], atol=1e-12)

    def test_jordan_block_rejected(self):
        with pytest.raises(DegenerateSpectrum):
            eig_general(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_zero_matrix_rejected(self):
        with pytest.raises(DegenerateSpectrum):
            eig_general(np.zeros((2, 2)))

    def test_sorted_by_real_then_imag(self):
        es = eig_general(np.diag([2.0, 1.0 + 1j, 1.0 - 1j, -3.0]))
        re = es.eigenvalues.real
        assert np.all(np.diff(re) >= 0)
        assert es.eigenvalues[1].imag < es.eigenvalues[2].imag

    @pytest.mark.parametrize("seed", range(8))
    def test_reconstruction_and_biorthogonality(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(2, 9))
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        es = eig_general(A)
        R = es.right
        recon = R @ np.diag(es.eigenvalues) @ np.linalg.inv(R)
        assert fro(A - recon) <= 1e-9 * fro(A)
        gram = es.left.conj().T @ es.right
        assert np.abs(gram - np.eye(n)).max() <= 1e-10
        # defining residuals of both eigenvector families
        for k in range(n):
            lam = es.eigenvalues[k]
            assert np.linalg.norm(A @ R[:, k] - lam * R[:, k]) <= 1e-10 * fro(A)
            assert (
                np.linalg.norm(A.conj().T @ es.left[:, k] - np.conj(lam) * es.left[:, k])
                <= 1e-9 * fro(A)
            )


class TestMatExp:
    def test_zero(self):
        assert_allclose(mat_exp(np.zeros((3, 3))), np.eye(3), atol=1e-15)

    def test_pauli_rotation(self):
        # e^{-i theta sx} = cos(theta) I - i sin(theta) sx at theta = pi/2
        got = mat_exp(-1j * (np.pi / 2) * SX)
        assert_allclose(got, np.array([[0, -1j], [-1j, 0]]), atol=1e-14)

    def test_diagonal(self):
        got = mat_exp(np.diag([1.0, -1.0]))
        assert_allclose(got, np.diag([np.e, 1 / np.e]), rtol=1e-14)

    @pytest.mark.parametrize("seed", range(4))
    def test_group_property_on_commuting_inputs(self, seed):
        rng = np.random.default_rng(300 + seed)
        A = random_hermitian(rng, 4)
        B = 0.3 * A @ A - 0.7 * A + 0.1 * np.eye(4)  # polynomial in A commutes
        lhs = mat_exp(A) @ mat_exp(B)
        rhs = mat_exp(A + B)
        assert fro(lhs - rhs) <= 1e-10 * max(fro(rhs), 1.0)


class TestHermSqrt:
    def test_identity(self):
        assert_allclose(herm_sqrt(np.eye(2)), np.eye(2), atol=1e-14)

    def test_diagonal(self):
        assert_allclose(herm_sqrt(np.diag([1.0, 4.0])), np.diag([1.0, 2.0]), atol=1e-14)

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            herm_sqrt(np.diag([1.0, -1.0]))

    def test_non_hermitian_rejected(self):
        with pytest.raises(NonHermitianInput):
            herm_sqrt(np.array([[1, 1], [0, 1]], dtype=complex))

    @pytest.mark.parametrize("seed", range(6))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(400 + seed)
        M = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        theta = M.conj().T @ M + 1e-3 * np.eye(5)
        S = herm_sqrt(theta)
        assert hermitian_residual(S) <= 1e-12 * fro(S)
        assert np.linalg.eigvalsh(S).min() > 0
        assert fro(S @ S - theta) <= 1e-10 * fro(theta)
