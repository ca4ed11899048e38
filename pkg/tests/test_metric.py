import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import H_QH, SX, SZ, THETA_QH, random_hermitian, random_invertible
from oracles import null_space_distance
from thsq.dyson import evaluate_map, metric_at
from thsq.errors import ComplexSpectrum, DegenerateSpectrum, NotPositiveDefinite
from thsq.linalg import fro, herm_sqrt, hermitian_residual
from thsq.metric import (
    dieudonne_residual,
    elementwise_conditions,
    factor_metric,
    solve_metric,
)


class TestDieudonneResidual:
    def test_hermitian_with_identity(self):
        assert dieudonne_residual(SX, np.eye(2)) == 0.0

    def test_worked_pair_vanishes(self):
        # H^dag Theta = [[0,2],[2,0]] = Theta H by direct arithmetic
        assert dieudonne_residual(H_QH, THETA_QH) <= 1e-15

    def test_identity_metric_gives_hermitian_residual(self):
        assert_allclose(dieudonne_residual(H_QH, np.eye(2)), 1.5 * np.sqrt(2), rtol=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            dieudonne_residual(H_QH, np.eye(3))


class TestSolveMetric:
    def test_hermitian_input_gives_identity(self):
        rng = np.random.default_rng(5)
        H = random_hermitian(rng, 4)
        cand = solve_metric(H)
        assert fro(cand.theta - np.eye(4)) <= 1e-10

    def test_worked_example_ratio(self):
        # unnormalized left eigenvectors (1,2), (1,-2) give diag(2,8) ~ diag(1,4)
        cand = solve_metric(H_QH)
        ratio = (cand.theta[1, 1] / cand.theta[0, 0]).real
        assert_allclose(ratio, 4.0, atol=1e-8)
        assert abs(cand.theta[0, 1]) <= 1e-12
        assert cand.residual <= 1e-12
        assert cand.min_eig > 0

    def test_complex_spectrum_rejected(self):
        # characteristic polynomial lambda^2 + 1 = 0
        with pytest.raises(ComplexSpectrum):
            solve_metric(np.array([[0, 1], [-1, 0]], dtype=complex))

    def test_degenerate_propagates(self):
        with pytest.raises(DegenerateSpectrum):
            solve_metric(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_bad_weights_rejected(self):
        with pytest.raises(ValueError):
            solve_metric(H_QH, weights=[1.0, -1.0])
        with pytest.raises(ValueError):
            solve_metric(H_QH, weights=[1.0, 1.0, 1.0])

    @pytest.mark.parametrize("seed", range(6))
    def test_random_quasi_hermitian_family(self, seed):
        # H = Omega^-1 h Omega has a real spectrum and admits the family
        rng = np.random.default_rng(900 + seed)
        h = random_hermitian(rng, 4)
        omega = random_invertible(rng, 4)
        H = np.linalg.inv(omega) @ h @ omega
        for weights in (None, rng.uniform(0.2, 3.0, 4)):
            cand = solve_metric(H, weights)
            assert hermitian_residual(cand.theta) <= 1e-12 * fro(cand.theta)
            assert cand.min_eig > 0
            assert cand.residual <= 1e-10 * fro(H) * fro(cand.theta)

    @pytest.mark.parametrize("seed", range(4))
    def test_brute_force_null_space_agreement(self, seed):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 5))
        h = random_hermitian(rng, n)
        omega = random_invertible(rng, n)
        H = np.linalg.inv(omega) @ h @ omega
        cand = solve_metric(H)
        assert null_space_distance(cand.theta, H) <= 1e-8

    def test_worked_example_null_space_agreement(self):
        cand = solve_metric(H_QH)
        assert null_space_distance(cand.theta, H_QH) <= 1e-10

    @pytest.mark.parametrize("seed", range(4))
    def test_hermitization_arrow(self, seed):
        # Theta^(1/2) H Theta^(-1/2) must be Hermitian for a valid candidate
        rng = np.random.default_rng(1100 + seed)
        h = random_hermitian(rng, 3)
        omega = random_invertible(rng, 3)
        H = np.linalg.inv(omega) @ h @ omega
        cand = solve_metric(H, weights=rng.uniform(0.5, 2.0, 3))
        S = herm_sqrt(cand.theta)
        dressed = S @ H @ np.linalg.inv(S)
        assert hermitian_residual(dressed) <= 1e-9 * fro(H)


class TestFactorMetric:
    def test_identity(self):
        m = factor_metric(np.eye(2))
        assert_allclose(evaluate_map(m, 0.0), np.eye(2))

    def test_diagonal(self):
        m = factor_metric(np.diag([1.0, 4.0]))
        assert_allclose(evaluate_map(m, 0.0), np.diag([1.0, 2.0]), atol=1e-14)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            factor_metric(np.diag([1.0, -1.0]))

    def test_round_trip_reproduces_metric(self, rng):
        M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        theta = M.conj().T @ M + np.eye(2)
        m = factor_metric(theta)
        assert fro(metric_at(m, 17.0) - theta) <= 1e-10 * fro(theta)

    def test_full_round_trip_hermitizes(self, rng):
        # solve_metric -> factor_metric -> dress recovers a Hermitian matrix
        h = random_hermitian(rng, 4)
        omega = random_invertible(rng, 4)
        H = np.linalg.inv(omega) @ h @ omega
        cand = solve_metric(H)
        m = factor_metric(cand.theta)
        S = evaluate_map(m, 0.0)
        dressed = S @ H @ np.linalg.inv(S)
        assert hermitian_residual(dressed) <= 1e-9 * fro(dressed)


class TestElementwiseConditions:
    def test_hermitian_ops_identity_metric(self):
        assert_allclose(elementwise_conditions([SX, SZ], np.eye(2)), [0.0, 0.0])

    def test_compatible_family(self):
        got = elementwise_conditions([H_QH, np.diag([1.0, -1.0])], THETA_QH)
        assert_allclose(got, [0.0, 0.0], atol=1e-15)

    def test_incompatible_operator_residual(self):
        # sx^dag diag(1,4) - diag(1,4) sx = [[0,3],[-3,0]], norm 3*sqrt(2)
        got = elementwise_conditions([H_QH, SX], THETA_QH)
        assert_allclose(got[0], 0.0, atol=1e-15)
        assert_allclose(got[1], 3 * np.sqrt(2), rtol=1e-14)
