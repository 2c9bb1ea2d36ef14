"""Riccati solver and the LQR / Kalman gain pair."""

import numpy as np
import pytest

from spikecontrol import (CartpoleParams, LqrCost, SmdParams,
                          cartpole_linearize_up, kalman_gain, lqr_gain,
                          smd_system, solve_care)


def _care_residual(A, B, Q, R, P):
    return A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T) @ P + Q


def test_scalar_care_closed_form():
    # a = b = q = r = 1: p^2 - 2p - 1 = 0, stabilizing root p = 1 + sqrt(2).
    sol = solve_care([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert abs(sol.P[0, 0] - (1.0 + np.sqrt(2.0))) < 1e-10
    assert abs(lqr_gain([[1.0]], [[1.0]], [[1.0]], [[1.0]])[0, 0]
               - (1.0 + np.sqrt(2.0))) < 1e-10


def test_scalar_care_zero_cost_stable_plant():
    # Stable plant, no state cost: doing nothing is optimal, P = 0, K = 0.
    sol = solve_care([[-1.0]], [[1.0]], [[0.0]], [[1.0]])
    assert abs(sol.P[0, 0]) < 1e-12
    assert abs(lqr_gain([[-1.0]], [[1.0]], [[0.0]], [[1.0]])[0, 0]) < 1e-12


def test_scalar_kalman_gain():
    # a = 0, c = 1, unit noise: error covariance 1, K_f = -1 (so a + K_f c < 0).
    kf = kalman_gain([[0.0]], [[1.0]], [[1.0]], [[1.0]])
    assert abs(kf[0, 0] - (-1.0)) < 1e-10


def test_kalman_gain_zero_disturbance():
    # No process noise on a stable plant: the filter trusts its model, K_f = 0.
    A, _, C = smd_system(SmdParams())
    kf = kalman_gain(A, C, np.zeros((2, 2)), np.eye(1))
    np.testing.assert_allclose(kf, np.zeros((2, 1)), atol=1e-12)


@pytest.mark.parametrize("name", ["smd", "cartpole"])
def test_care_solution_properties(name):
    if name == "smd":
        A, B, _ = smd_system(SmdParams(m=20.0, k=6.0, c=2.0))
        Q, R = np.diag([10.0, 1.0]), np.array([[1e-2]])
    else:
        A, B, _ = cartpole_linearize_up(CartpoleParams())
        Q, R = np.diag([1.0, 1.0, 10.0, 1.0]), np.array([[1e-2]])
    sol = solve_care(A, B, Q, R)
    n = A.shape[0]
    np.testing.assert_allclose(sol.P, sol.P.T, atol=1e-10)
    assert np.linalg.eigvalsh(sol.P).min() >= -1e-10
    resid = _care_residual(A, B, Q, R, sol.P)
    assert np.linalg.norm(resid) < 1e-8 * max(1.0, np.linalg.norm(sol.P))
    assert sol.residual_norm < 1e-8 * max(1.0, np.linalg.norm(sol.P))
    kc = lqr_gain(A, B, Q, R)
    assert kc.shape == (1, n)
    assert np.linalg.eigvals(A - B @ kc).real.max() < 0
    np.testing.assert_allclose(sol.closed_loop_eigs.real.max(),
                               np.linalg.eigvals(A - B @ kc).real.max(),
                               rtol=1e-6)


@pytest.mark.parametrize("name", ["smd", "cartpole"])
def test_kalman_gain_stabilizes_estimator(name):
    if name == "smd":
        A, _, C = smd_system(SmdParams())
        sd, sn = 0.001 * np.eye(2), 0.001 * np.eye(1)
    else:
        A, _, C = cartpole_linearize_up(CartpoleParams())
        sd, sn = 1e-7 * np.eye(4), 1e-7 * np.eye(1)
    kf = kalman_gain(A, C, sd, sn)
    assert kf.shape == (A.shape[0], 1)
    assert np.linalg.eigvals(A + kf @ C).real.max() < 0


def test_kalman_is_dual_lqr():
    # Filtering is control of the transposed system: K_f = -(lqr of A', C')'.
    A, _, C = smd_system(SmdParams())
    sd, sn = 0.002 * np.eye(2), 0.0005 * np.eye(1)
    kf = kalman_gain(A, C, sd, sn)
    dual = lqr_gain(A.T, C.T, sd, sn)
    np.testing.assert_allclose(kf, -dual.T, atol=1e-10)


def test_care_rejects_unstabilizable_pair():
    # Unstable mode with no input authority: no stabilizing P exists.
    with pytest.raises(ValueError, match="no stabilizing solution"):
        solve_care([[1.0]], [[0.0]], [[1.0]], [[1.0]])


def test_care_rejects_imaginary_axis_hamiltonian():
    # Undamped oscillator, no cost, no input: Hamiltonian eigenvalues sit on
    # the imaginary axis.
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(ValueError, match="no stabilizing solution"):
        solve_care(A, np.zeros((2, 1)), np.zeros((2, 2)), [[1.0]])


def test_care_rejects_bad_shapes():
    with pytest.raises(ValueError, match="dimensions"):
        solve_care(np.eye(2), np.zeros((3, 1)), np.eye(2), [[1.0]])


def test_lqr_cost_validation():
    LqrCost(Q=np.diag([10.0, 1.0]), R=[[1e-2]])  # fine
    with pytest.raises(ValueError, match="symmetric"):
        LqrCost(Q=np.array([[1.0, 0.5], [0.0, 1.0]]), R=[[1.0]])
    with pytest.raises(ValueError, match="positive definite"):
        LqrCost(Q=np.eye(2), R=[[0.0]])
    with pytest.raises(ValueError, match="positive semidefinite"):
        LqrCost(Q=-np.eye(2), R=[[1.0]])
