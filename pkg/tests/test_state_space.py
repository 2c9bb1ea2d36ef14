"""Noise streams, plant stepping, observation, and finite-difference Jacobians."""

import numpy as np
import pytest

from spikecontrol import (LinearSystem, NoiseSource, SmdParams, StreamLabel,
                          euler_step, linearize, make_rng, observe, smd_system,
                          validate)


def _smd_linear_system(sigma_d=0.001, sigma_n=0.001):
    A, B, C = smd_system(SmdParams())
    return LinearSystem(A=A, B=B, C=C, sigma_d=sigma_d * np.eye(2),
                        sigma_n=sigma_n * np.eye(1))


# ---------------------------------------------------------------------------
# seeded streams


def test_make_rng_is_deterministic():
    a = make_rng(3, StreamLabel.DECODER).standard_normal(8)
    b = make_rng(3, StreamLabel.DECODER).standard_normal(8)
    np.testing.assert_array_equal(a, b)


def test_make_rng_streams_are_distinct():
    a = make_rng(3, StreamLabel.DISTURBANCE).standard_normal(8)
    b = make_rng(3, StreamLabel.SENSOR).standard_normal(8)
    c = make_rng(4, StreamLabel.DISTURBANCE).standard_normal(8)
    assert not np.allclose(a, b)
    assert not np.allclose(a, c)


def test_noise_source_replay():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    s1 = NoiseSource(cov, seed=11, label=StreamLabel.DISTURBANCE)
    s2 = NoiseSource(cov, seed=11, label=StreamLabel.DISTURBANCE)
    draws1 = np.array([s1.sample() for _ in range(50)])
    draws2 = np.array([s2.sample() for _ in range(50)])
    np.testing.assert_array_equal(draws1, draws2)


def test_noise_source_reset_restarts_stream():
    src = NoiseSource(np.eye(2), seed=5, label=StreamLabel.SENSOR)
    first = src.sample_block(20)
    src.reset()
    np.testing.assert_array_equal(src.sample_block(20), first)


def test_sample_block_matches_repeated_samples():
    cov = np.array([[1.5, -0.2], [-0.2, 0.7]])
    blocked = NoiseSource(cov, seed=9, label=StreamLabel.VOLTAGE).sample_block(17)
    looped = NoiseSource(cov, seed=9, label=StreamLabel.VOLTAGE)
    rows = np.array([looped.sample() for _ in range(17)])
    np.testing.assert_array_equal(blocked, rows)


def test_noise_source_statistics():
    # 1e5 samples: sample mean ~ 0 and sample covariance ~ cov within 5%.
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    draws = NoiseSource(cov, seed=0, label=StreamLabel.DISTURBANCE).sample_block(100_000)
    mean = draws.mean(axis=0)
    emp = np.cov(draws.T)
    assert np.abs(mean).max() < 0.05 * np.sqrt(cov.diagonal().max())
    assert np.abs(emp - cov).max() < 0.05 * np.abs(cov).max()


def test_noise_source_zero_covariance():
    src = NoiseSource(np.zeros((2, 2)), seed=1, label=StreamLabel.DISTURBANCE)
    np.testing.assert_array_equal(src.sample_block(4), np.zeros((4, 2)))


def test_noise_source_rejects_bad_covariance():
    with pytest.raises(ValueError):
        NoiseSource(np.array([[1.0, 0.5], [0.0, 1.0]]), seed=0,
                    label=StreamLabel.DISTURBANCE)
    with pytest.raises(ValueError):
        NoiseSource(np.array([[1.0, 2.0], [2.0, 1.0]]), seed=0,
                    label=StreamLabel.DISTURBANCE)  # indefinite


# ---------------------------------------------------------------------------
# system validation


def test_validate_accepts_smd():
    assert validate(_smd_linear_system()) == []


def test_validate_flags_nonsquare_A():
    sys = LinearSystem(A=np.zeros((2, 3)), B=np.zeros((2, 1)),
                       C=np.zeros((1, 2)), sigma_d=np.eye(2), sigma_n=np.eye(1))
    assert "A not square" in validate(sys)


def test_validate_flags_shape_mismatches():
    sys = LinearSystem(A=np.zeros((2, 2)), B=np.zeros((3, 1)),
                       C=np.zeros((1, 3)), sigma_d=np.eye(3), sigma_n=np.eye(2))
    problems = validate(sys)
    assert "B row count does not match A" in problems
    assert "C column count does not match A" in problems
    assert "sigma_d size does not match state dimension" in problems


def test_validate_flags_noise_definiteness():
    base = _smd_linear_system()
    singular = LinearSystem(A=base.A, B=base.B, C=base.C,
                            sigma_d=base.sigma_d, sigma_n=np.zeros((1, 1)))
    assert "sigma_n not positive definite" in validate(singular)
    indefinite = LinearSystem(A=base.A, B=base.B, C=base.C,
                              sigma_d=-np.eye(2), sigma_n=base.sigma_n)
    assert "sigma_d not positive semidefinite" in validate(indefinite)
    skewed = LinearSystem(A=base.A, B=base.B, C=base.C,
                          sigma_d=np.array([[1.0, 0.3], [0.0, 1.0]]),
                          sigma_n=base.sigma_n)
    assert "sigma_d not symmetric" in validate(skewed)


# ---------------------------------------------------------------------------
# stepping and observation


def test_euler_step_double_integrator():
    sys = LinearSystem(A=np.array([[0.0, 1.0], [0.0, 0.0]]),
                       B=np.zeros((2, 1)), C=np.eye(2),
                       sigma_d=np.zeros((2, 2)), sigma_n=np.eye(2))
    np.testing.assert_allclose(euler_step(sys, [1.0, 2.0], [0.0], 0.1),
                               [1.2, 2.0], atol=1e-15)


def test_euler_step_smd_from_unit_position():
    sys = _smd_linear_system()
    x1 = euler_step(sys, [1.0, 0.0], [0.0], 1e-3)
    np.testing.assert_allclose(x1, [1.0, -(5.0 / 3.0) * 1e-3], rtol=1e-12)


def test_euler_step_disturbance_scaling():
    # Per-step disturbance variance is dt * sigma_d: the injected sample is
    # sqrt(dt) times a unit-covariance draw here.
    sys = LinearSystem(A=np.zeros((2, 2)), B=np.zeros((2, 1)), C=np.eye(2),
                       sigma_d=np.eye(2), sigma_n=np.eye(2))
    dt = 0.04
    src = NoiseSource(np.eye(2), seed=3, label=StreamLabel.DISTURBANCE)
    expected = np.sqrt(dt) * NoiseSource(np.eye(2), seed=3,
                                         label=StreamLabel.DISTURBANCE).sample()
    np.testing.assert_allclose(euler_step(sys, [0.0, 0.0], [0.0], dt, src),
                               expected, atol=1e-15)


def test_observe_reads_position():
    sys = _smd_linear_system()
    np.testing.assert_array_equal(observe(sys, [0.7, -2.0]), [0.7])
    noisy = observe(sys, [0.7, -2.0],
                    NoiseSource(np.eye(1), seed=2, label=StreamLabel.SENSOR))
    assert noisy.shape == (1,)
    assert noisy[0] != 0.7


# ---------------------------------------------------------------------------
# linearization


def test_linearize_recovers_linear_dynamics():
    A, B, _ = smd_system(SmdParams())
    f = lambda x, u: A @ x + B @ np.atleast_1d(u)
    A_hat, B_hat = linearize(f, [0.0, 0.0], [0.0])
    np.testing.assert_allclose(A_hat, A, atol=1e-8)
    np.testing.assert_allclose(B_hat, B, atol=1e-8)


def test_linearize_rejects_non_equilibrium():
    A, B, _ = smd_system(SmdParams())
    f = lambda x, u: A @ x + B @ np.atleast_1d(u)
    with pytest.raises(ValueError, match="not an equilibrium"):
        linearize(f, [1.0, 0.0], [0.0])
