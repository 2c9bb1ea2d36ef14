"""Ground-truth plants: spring-mass-damper and the nonlinear cartpole."""

from dataclasses import dataclass

import numpy as np


@dataclass
class SmdParams:
    """Spring-mass-damper: mass m, spring constant k, damping c."""

    m: float = 3.0
    k: float = 5.0
    c: float = 0.5

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if self.k < 0 or self.c < 0:
            raise ValueError("spring and damping constants must be nonnegative")


def smd_dynamics(p: SmdParams, x, u):
    """State rate for state x = (position, velocity) and scalar force u."""
    u = float(np.asarray(u).reshape(-1)[0]) if np.ndim(u) else float(u)
    return np.array([x[1], (-p.k * x[0] - p.c * x[1] + u) / p.m])


def smd_system(p: SmdParams):
    """(A, B, C) of the spring-mass-damper; only position is observed."""
    A = np.array([[0.0, 1.0], [-p.k / p.m, -p.c / p.m]])
    B = np.array([[0.0], [1.0 / p.m]])
    C = np.array([[1.0, 0.0]])
    return A, B, C


@dataclass
class CartpoleParams:
    """Cart of mass M on a frictional track (coefficient d), pole mass m, length L.

    g is signed (negative for downward gravity); theta = pi is the upright pole.
    """

    m: float = 1.0
    M: float = 5.0
    L: float = 2.0
    g: float = -10.0
    d: float = 1.0

    def __post_init__(self):
        if self.m <= 0 or self.M <= 0 or self.L <= 0:
            raise ValueError("masses and length must be positive")


def cartpole_dynamics(p: CartpoleParams, x, u):
    """State rate for x = (cart pos, cart vel, pole angle, pole ang. vel), force u."""
    u = float(np.asarray(u).reshape(-1)[0]) if np.ndim(u) else float(u)
    _, vel, theta, omega = x
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    den = p.m * p.L**2 * (p.M + p.m * (1.0 - cos_t**2))
    swing = p.m * p.L * omega**2 * sin_t - p.d * vel
    acc_cart = (
        -(p.m**2) * p.L**2 * p.g * cos_t * sin_t + p.m * p.L**2 * swing + p.m * p.L**2 * u
    ) / den
    acc_pole = (
        (p.m + p.M) * p.m * p.g * p.L * sin_t - p.m * p.L * cos_t * swing - p.m * p.L * cos_t * u
    ) / den
    return np.array([vel, acc_cart, omega, acc_pole])


def cartpole_linearize_up(p: CartpoleParams):
    """(A, B, C) of the cartpole linearized at the upright pole (theta = pi).

    Analytic Jacobian of `cartpole_dynamics`; only the cart position is
    observed.
    """
    ML = p.M * p.L
    A = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, -p.d / p.M, -p.m * p.g / p.M, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, -p.d / ML, -(p.m + p.M) * p.g / ML, 0.0],
        ]
    )
    B = np.array([[0.0], [1.0 / p.M], [0.0], [1.0 / ML]])
    C = np.array([[1.0, 0.0, 0.0, 0.0]])
    return A, B, C


CARTPOLE_UP = np.array([0.0, 0.0, np.pi, 0.0])


@dataclass
class PulseSchedule:
    """A rectangular force pulse on the plant's input channel, active on
    [onset, onset + duration)."""

    onset: float
    duration: float
    magnitude: float

    def __post_init__(self):
        if self.onset < 0 or self.duration <= 0:
            raise ValueError("pulse onset must be nonnegative and duration positive")

    def force(self, t: float) -> float:
        return self.magnitude if self.onset <= t < self.onset + self.duration else 0.0

    def profile(self, tgrid: np.ndarray) -> np.ndarray:
        return np.where(
            (tgrid >= self.onset) & (tgrid < self.onset + self.duration), self.magnitude, 0.0
        )
