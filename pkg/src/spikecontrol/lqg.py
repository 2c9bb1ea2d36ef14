"""Non-spiking LQG baseline: continuous Kalman filter plus LQR feedback.

Used as the ideal-controller comparison curve and as the oracle the spiking
network is measured against. Integrates with the same forward-Euler step and
the same noise streams as the network runs.
"""

from dataclasses import dataclass

import numpy as np

from .state_space import LinearSystem


@dataclass
class LqgState:
    x_hat: np.ndarray
    u: np.ndarray = None

    def __post_init__(self):
        self.x_hat = np.asarray(self.x_hat, dtype=float).reshape(-1)
        if self.u is not None:
            self.u = np.asarray(self.u, dtype=float).reshape(-1)


def estimator_step(model: LinearSystem, kalman_gain, st: LqgState,
                   y, u_ext, dt: float) -> LqgState:
    """One Euler step of x_hat' = A x_hat + B u + K_f (C x_hat - y)."""
    Kf = np.atleast_2d(kalman_gain)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    u_ext = np.atleast_1d(np.asarray(u_ext, dtype=float))
    xh = st.x_hat
    innov = Kf @ (model.C @ xh - y)
    st.x_hat = xh + dt * (model.A @ xh + model.B @ u_ext + innov)
    st.u = u_ext
    return st


def lqg_step(model: LinearSystem, kalman_gain, lqr_gain, st: LqgState,
             y, z, dt: float) -> LqgState:
    """Control from the current estimate, then advance the estimate.

    u = -K_c (x_hat - z) is computed before the filter update so the plant and
    the estimator consume the same control this step.
    """
    Kc = np.atleast_2d(lqr_gain)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    u = -Kc @ (st.x_hat - z)
    return estimator_step(model, kalman_gain, st, y, u, dt)


def closed_loop_steady_state(model: LinearSystem, lqr_gain, z) -> np.ndarray:
    """Fixed point of x' = Ax + Bu with u = -K_c(x - z) (state feedback).

    The regulator does not track position references exactly: the fixed point
    solves (A - B K_c) x_ss = -B K_c z, which generally leaves an offset.
    """
    Kc = np.atleast_2d(lqr_gain)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    BKc = model.B @ Kc
    return np.linalg.solve(model.A - BKc, -BKc @ z)
