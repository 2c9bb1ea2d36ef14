"""Seeded experiment scenarios, runners, and output writers.

Every run is a pure function of (Scenario, master_seed): noise is drawn from
labelled streams, the spiking network and the ideal LQG loop consume the same
disturbance/sensor realizations, and all outputs (trajectory, raster, summary)
replay bit-for-bit under the same seed.

Trajectory row convention: row i carries time t_i = i*dt, the plant state
*before* the step, the observation consumed during the step, and the decodes
(x_hat, z_hat, u) *after* the step — i.e. the estimate that has absorbed y_i
and the control that drove the plant from t_i to t_{i+1}. The oracle columns
follow the same alignment. Cartpole trajectories are recorded in deviation
coordinates about the upright equilibrium (pole angle column is theta - pi).
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .lqg import LqgState, estimator_step, lqg_step
from .plants import (CARTPOLE_UP, CartpoleParams, PulseSchedule, SmdParams,
                     cartpole_dynamics, cartpole_linearize_up, smd_system)
from .riccati import LqrCost, kalman_gain, lqr_gain
from .scn import (NetworkDivergedError, build_controller, build_estimator,
                  new_state, network_step, sample_decoder, silence)
from .state_space import LinearSystem, NoiseSource, StreamLabel, make_rng


class PoleDroppedError(RuntimeError):
    pass


SCENARIO_NAMES = ("estimation", "smd_control", "silencing", "robustness_sweep",
                  "cartpole", "sparsity")

DEFAULT_LAMBDAS = (0.0, 1.0, 10.0)
DEFAULT_NOISE_GRID = tuple(np.logspace(-5, -1, 10))
DEFAULT_PULSE_GRID = tuple(np.linspace(100.0, 900.0, 10))
DEFAULT_SILENCING = ((10.0, tuple(range(0, 15))), (26.6, tuple(range(15, 30))),
                     (43.3, tuple(range(30, 45))))


@dataclass
class ReferenceSchedule:
    """Piecewise-constant target states: values[i] holds from times[i] onward.

    Before times[0] the reference is the zero state. `sample_grid` returns the
    reference on the integration grid together with its forward-difference
    derivative, so a stair step appears as a single one-step kick in zdot.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.times.ndim != 1 or len(self.times) != len(self.values):
            raise ValueError("need one value row per schedule time")
        if len(self.times) > 1 and np.diff(self.times).min() <= 0:
            raise ValueError("schedule times must be strictly increasing")

    @property
    def state_dim(self):
        return self.values.shape[1]

    def value(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t + 1e-9, side="right"))
        if idx == 0:
            return np.zeros(self.state_dim)
        return self.values[idx - 1]

    def sample_grid(self, n: int, dt: float):
        tgrid = np.arange(n) * dt
        idx = np.searchsorted(self.times, tgrid + 1e-9, side="right")
        extended = np.vstack([np.zeros((1, self.state_dim)), self.values])
        z = extended[idx]
        zdot = np.zeros_like(z)
        zdot[:-1] = (z[1:] - z[:-1]) / dt
        return z, zdot


def stair_reference(positions, times, state_dim: int) -> ReferenceSchedule:
    """Stair on the position component (index 0), zeros elsewhere."""
    positions = np.asarray(positions, dtype=float)
    values = np.zeros((len(positions), state_dim))
    values[:, 0] = positions
    return ReferenceSchedule(times=np.asarray(times, dtype=float), values=values)


@dataclass
class Scenario:
    name: str
    plant: object
    n_neurons: int
    gamma_x: float
    leak: float
    eta_v: float
    sigma_d: float
    sigma_n: float
    dt: float
    duration: float
    master_seed: int
    x0: np.ndarray
    gamma_z: float = None
    cost: LqrCost = None
    reference: ReferenceSchedule = None
    silencing: list = None          # [(time, (neuron ids...)), ...]
    pulse: PulseSchedule = None

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario name {self.name!r}")
        if self.dt <= 0 or self.duration <= 0:
            raise ValueError("dt and duration must be positive")
        if self.n_neurons < 1:
            raise ValueError("need at least one neuron")
        self.x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if self.silencing:
            self.silencing = sorted(
                (float(t), tuple(int(i) for i in ids)) for t, ids in self.silencing
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


def estimation_scenario(master_seed: int = 0) -> Scenario:
    """Passive SMD observed through noisy position; network estimates state."""
    return Scenario(
        name="estimation", plant=SmdParams(m=3.0, k=5.0, c=0.5), n_neurons=20,
        gamma_x=0.1, leak=0.1, eta_v=1e-5, sigma_d=0.001, sigma_n=0.001,
        dt=1e-3, duration=50.0, master_seed=master_seed, x0=[1.0, 0.0],
    )


def smd_control_scenario(master_seed: int = 0, with_silencing: bool = False) -> Scenario:
    """SMD position driven up a stair of setpoints; optional neuron kills."""
    silencing = list(DEFAULT_SILENCING) if with_silencing else None
    return Scenario(
        name="silencing" if with_silencing else "smd_control",
        plant=SmdParams(m=20.0, k=6.0, c=2.0), n_neurons=50,
        gamma_x=0.1, gamma_z=0.1, leak=0.1, eta_v=1e-5, sigma_d=0.1, sigma_n=0.1,
        cost=LqrCost(Q=np.diag([10.0, 1.0]), R=[[1e-2]]),
        reference=stair_reference([2.0, 4.0, 6.0, 8.0], [10.0, 20.0, 30.0, 40.0], 2),
        silencing=silencing, dt=1e-3, duration=50.0, master_seed=master_seed,
        x0=[0.0, 0.0],
    )


def robustness_scenario(master_seed: int = 0) -> Scenario:
    """Hold-at-setpoint SMD run hit by a force pulse; swept over noise/pulse."""
    return Scenario(
        name="robustness_sweep", plant=SmdParams(m=3.0, k=5.0, c=0.5),
        n_neurons=50, gamma_x=0.1, gamma_z=0.1, leak=0.1, eta_v=1e-5,
        sigma_d=0.001, sigma_n=0.001,
        cost=LqrCost(Q=np.diag([10.0, 1.0]), R=[[1e-2]]),
        reference=ReferenceSchedule(times=[0.0], values=[[1.0, 0.0]]),
        pulse=PulseSchedule(onset=2.5, duration=0.2, magnitude=0.0),
        dt=1e-4, duration=5.0, master_seed=master_seed, x0=[1.0, 0.0],
    )


def cartpole_scenario(master_seed: int = 0, step_height: float = 1.0) -> Scenario:
    """Nonlinear cartpole balanced about theta=pi while the cart climbs a stair."""
    levels = [step_height * (i + 1) for i in range(4)]
    return Scenario(
        name="cartpole", plant=CartpoleParams(), n_neurons=100,
        gamma_x=0.01, gamma_z=0.01, leak=0.1, eta_v=1e-5, sigma_d=1e-7, sigma_n=1e-7,
        cost=LqrCost(Q=np.diag([1.0, 1.0, 10.0, 1.0]), R=[[1e-2]]),
        reference=stair_reference(levels, [10.0, 20.0, 30.0, 40.0], 4),
        dt=1e-4, duration=50.0, master_seed=master_seed, x0=CARTPOLE_UP,
    )


def sparsity_scenario(master_seed: int = 0, leak: float = 1.0) -> Scenario:
    """Large-decoder SMD control run used to count spikes as the leak varies."""
    return Scenario(
        name="sparsity", plant=SmdParams(m=20.0, k=6.0, c=2.0), n_neurons=50,
        gamma_x=1.0, gamma_z=1.0, leak=leak, eta_v=1e-6, sigma_d=0.001,
        sigma_n=0.001, cost=LqrCost(Q=np.diag([10.0, 1.0]), R=[[1e-2]]),
        reference=stair_reference([6.0, 12.0, 18.0, 24.0], [2.0, 4.0, 6.0, 8.0], 2),
        dt=1e-4, duration=10.0, master_seed=master_seed, x0=[0.0, 0.0],
    )


@dataclass
class Trajectory:
    time: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_hat: np.ndarray
    oracle_x_hat: np.ndarray
    z_hat: np.ndarray = None
    u: np.ndarray = None
    z: np.ndarray = None
    oracle_u: np.ndarray = None
    oracle_x: np.ndarray = None
    spikes: list = field(default_factory=list)
    silence_events: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def spike_count(self) -> int:
        return len(self.spikes)


@dataclass
class SweepResult:
    noise_grid: np.ndarray
    pulse_grid: np.ndarray
    scn_mae: np.ndarray
    oracle_mae: np.ndarray
    scn_rmse: np.ndarray
    oracle_rmse: np.ndarray
    failed_cells: list
    meta: dict


@dataclass
class SparsityResult:
    lambdas: list
    spike_counts: list
    trajectories: list


def _linear_system(sc: Scenario) -> LinearSystem:
    if isinstance(sc.plant, SmdParams):
        A, B, C = smd_system(sc.plant)
    elif isinstance(sc.plant, CartpoleParams):
        A, B, C = cartpole_linearize_up(sc.plant)
    else:
        raise TypeError(f"unsupported plant {type(sc.plant).__name__}")
    obs_dim = C.shape[0]
    return LinearSystem(A=A, B=B, C=C,
                        sigma_d=sc.sigma_d * np.eye(A.shape[0]),
                        sigma_n=sc.sigma_n * np.eye(obs_dim))


def _decoders(sc: Scenario, state_dim: int, need_z: bool):
    rng = make_rng(sc.master_seed, StreamLabel.DECODER)
    dec_x = sample_decoder(state_dim, sc.n_neurons, sc.gamma_x, rng=rng)
    if not need_z:
        return dec_x, None
    gamma_z = sc.gamma_z if sc.gamma_z is not None else sc.gamma_x
    dec_z = sample_decoder(state_dim, sc.n_neurons, gamma_z, rng=rng)
    return dec_x, dec_z


def build_network(sc: Scenario):
    """Construct the scenario's network; returns (system, weights)."""
    system = _linear_system(sc)
    kf = kalman_gain(system.A, system.C, system.sigma_d, system.sigma_n)
    if sc.cost is None:
        dec_x, _ = _decoders(sc, system.state_dim, need_z=False)
        return system, build_estimator(system, kf, dec_x, sc.leak)
    kc = lqr_gain(system.A, system.B, sc.cost.Q, sc.cost.R)
    dec_x, dec_z = _decoders(sc, system.state_dim, need_z=True)
    return system, build_controller(system, kf, kc, dec_x, dec_z, sc.leak)


def _noise_sources(sc: Scenario, system: LinearSystem):
    dist = NoiseSource(sc.sigma_d * np.eye(system.state_dim), sc.master_seed,
                       StreamLabel.DISTURBANCE)
    sens = NoiseSource(sc.sigma_n * np.eye(system.obs_dim), sc.master_seed,
                       StreamLabel.SENSOR)
    volt = NoiseSource(sc.eta_v ** 2 * np.eye(sc.n_neurons), sc.master_seed,
                       StreamLabel.VOLTAGE)
    return dist, sens, volt


def _voltage_rows(source: NoiseSource, n: int, block: int = 16384):
    """Yield n per-step noise rows, drawn in blocks to bound memory."""
    done = 0
    while done < n:
        m = min(block, n - done)
        for row in source.sample_block(m):
            yield row
        done += m


def _meta(sc: Scenario, **extra) -> dict:
    out = {
        "scenario": sc.name, "master_seed": sc.master_seed,
        "n_neurons": sc.n_neurons, "dt": sc.dt, "duration": sc.duration,
        "leak": sc.leak, "gamma_x": sc.gamma_x, "gamma_z": sc.gamma_z,
        "sigma_d": sc.sigma_d, "sigma_n": sc.sigma_n, "eta_v": sc.eta_v,
        "artifact_choices": _artifact_choices(sc),
    }
    out.update(extra)
    return out


def _artifact_choices(sc: Scenario) -> dict:
    # Parameters the reference material leaves open; values here are ours.
    out = {"voltage_noise_scaling": "sqrt(dt)"}
    if sc.reference is not None:
        out["reference_times"] = [float(t) for t in sc.reference.times]
        out["reference_positions"] = [float(v) for v in sc.reference.values[:, 0]]
    if sc.pulse is not None:
        out["pulse_onset"] = sc.pulse.onset
        out["pulse_duration"] = sc.pulse.duration
    return out


def run_estimation(sc: Scenario) -> Trajectory:
    """Simulate the noisy plant with u=0 and estimate it with SCN and oracle."""
    if sc.name != "estimation":
        raise ValueError("run_estimation needs an estimation scenario")
    system = _linear_system(sc)
    kf = kalman_gain(system.A, system.C, system.sigma_d, system.sigma_n)
    dec_x, _ = _decoders(sc, system.state_dim, need_z=False)
    weights = build_estimator(system, kf, dec_x, sc.leak)
    st = new_state(weights)
    est = LqgState(np.zeros(system.state_dim))

    n, dt = sc.n_steps, sc.dt
    dist, sens, volt = _noise_sources(sc, system)
    w = np.sqrt(dt) * dist.sample_block(n)
    e = sens.sample_block(n)
    vrows = _voltage_rows(volt, n)
    sdt = np.sqrt(dt)

    A, C = system.A, system.C
    dxv = weights.decoder_x.values
    u0 = np.zeros(system.input_dim)
    X = np.empty((n, system.state_dim))
    Y = np.empty((n, system.obs_dim))
    XH = np.empty_like(X)
    OXH = np.empty_like(X)
    x = sc.x0.copy()
    for i in range(n):
        y = C @ x + e[i]
        network_step(weights, st, dt, y=y, u=u0, noise=sdt * next(vrows))
        estimator_step(system, kf, est, y, u0, dt)
        X[i] = x
        Y[i] = y
        XH[i] = dxv @ st.r
        OXH[i] = est.x_hat
        x = x + dt * (A @ x) + w[i]
    return Trajectory(time=np.arange(n) * dt, x=X, y=Y, x_hat=XH,
                      oracle_x_hat=OXH, spikes=list(st.spike_log),
                      meta=_meta(sc))


def run_control(sc: Scenario) -> Trajectory:
    """Close the loop on the linear SMD plant with the spiking controller.

    An ideal LQG loop runs on an identical plant copy fed the same noise
    draws, so the two trajectories differ only by the spiking approximation.
    Handles the plain stair scenario, the silencing schedule, and the
    large-decoder sparsity configuration.
    """
    if sc.cost is None or sc.reference is None:
        raise ValueError("control run needs a cost and a reference schedule")
    if not isinstance(sc.plant, SmdParams):
        raise ValueError("run_control integrates the linear plant; "
                         "use run_cartpole for the cartpole")
    system = _linear_system(sc)
    kf = kalman_gain(system.A, system.C, system.sigma_d, system.sigma_n)
    kc = lqr_gain(system.A, system.B, sc.cost.Q, sc.cost.R)
    dec_x, dec_z = _decoders(sc, system.state_dim, need_z=True)
    weights = build_controller(system, kf, kc, dec_x, dec_z, sc.leak)
    st = new_state(weights)
    est = LqgState(np.zeros(system.state_dim))

    n, dt = sc.n_steps, sc.dt
    time = np.arange(n) * dt
    z, zdot = sc.reference.sample_grid(n, dt)
    pulse = sc.pulse.profile(time) if sc.pulse is not None else None
    kills = list(sc.silencing or [])
    ki = 0

    dist, sens, volt = _noise_sources(sc, system)
    w = np.sqrt(dt) * dist.sample_block(n)
    e = sens.sample_block(n)
    vrows = _voltage_rows(volt, n)
    sdt = np.sqrt(dt)

    A, B, C = system.A, system.B, system.C
    dxv, dzv = dec_x.values, dec_z.values
    K, P = system.state_dim, system.input_dim
    X = np.empty((n, K))
    Y = np.empty((n, system.obs_dim))
    XH = np.empty((n, K))
    ZH = np.empty((n, K))
    U = np.empty((n, P))
    OXH = np.empty((n, K))
    OU = np.empty((n, P))
    OX = np.empty((n, K))
    x = sc.x0.copy()
    xo = sc.x0.copy()
    for i in range(n):
        t = time[i]
        while ki < len(kills) and t >= kills[ki][0] - 1e-9:
            silence(st, kills[ki][1], t)
            ki += 1
        y = C @ x + e[i]
        network_step(weights, st, dt, y=y, z=z[i], zdot=zdot[i],
                     noise=sdt * next(vrows))
        xh = dxv @ st.r
        zh = dzv @ st.r
        u = -(kc @ (xh - zh))
        yo = C @ xo + e[i]
        lqg_step(system, kf, kc, est, yo, z[i], dt)
        X[i] = x
        Y[i] = y
        XH[i] = xh
        ZH[i] = zh
        U[i] = u
        OXH[i] = est.x_hat
        OU[i] = est.u
        OX[i] = xo
        up = u if pulse is None else u + pulse[i]
        uop = est.u if pulse is None else est.u + pulse[i]
        x = x + dt * (A @ x + B @ up) + w[i]
        xo = xo + dt * (A @ xo + B @ uop) + w[i]
    return Trajectory(time=time, x=X, y=Y, x_hat=XH, oracle_x_hat=OXH,
                      z_hat=ZH, u=U, z=z, oracle_u=OU, oracle_x=OX,
                      spikes=list(st.spike_log),
                      silence_events=list(st.silence_log), meta=_meta(sc))


def run_cartpole(sc: Scenario) -> Trajectory:
    """Balance the nonlinear cartpole with the controller built on the
    upright linearization; recorded in deviation coordinates (theta - pi)."""
    if sc.name != "cartpole" or not isinstance(sc.plant, CartpoleParams):
        raise ValueError("run_cartpole needs a cartpole scenario")
    if sc.cost is None or sc.reference is None:
        raise ValueError("cartpole run needs a cost and a reference schedule")
    system = _linear_system(sc)
    kf = kalman_gain(system.A, system.C, system.sigma_d, system.sigma_n)
    kc = lqr_gain(system.A, system.B, sc.cost.Q, sc.cost.R)
    dec_x, dec_z = _decoders(sc, system.state_dim, need_z=True)
    weights = build_controller(system, kf, kc, dec_x, dec_z, sc.leak)
    st = new_state(weights)
    est = LqgState(np.zeros(system.state_dim))

    n, dt = sc.n_steps, sc.dt
    time = np.arange(n) * dt
    z, zdot = sc.reference.sample_grid(n, dt)
    dist, sens, volt = _noise_sources(sc, system)
    w = np.sqrt(dt) * dist.sample_block(n)
    e = sens.sample_block(n)
    vrows = _voltage_rows(volt, n)
    sdt = np.sqrt(dt)

    C = system.C
    dxv, dzv = dec_x.values, dec_z.values
    x_eq = CARTPOLE_UP
    p = sc.plant
    X = np.empty((n, 4))
    Y = np.empty((n, 1))
    XH = np.empty((n, 4))
    ZH = np.empty((n, 4))
    U = np.empty((n, 1))
    OXH = np.empty((n, 4))
    OU = np.empty((n, 1))
    OX = np.empty((n, 4))
    x = sc.x0.copy()
    xo = sc.x0.copy()
    for i in range(n):
        dev = x - x_eq
        y = C @ dev + e[i]
        network_step(weights, st, dt, y=y, z=z[i], zdot=zdot[i],
                     noise=sdt * next(vrows))
        xh = dxv @ st.r
        zh = dzv @ st.r
        u = -(kc @ (xh - zh))
        devo = xo - x_eq
        yo = C @ devo + e[i]
        lqg_step(system, kf, kc, est, yo, z[i], dt)
        X[i] = dev
        Y[i] = y
        XH[i] = xh
        ZH[i] = zh
        U[i] = u
        OXH[i] = est.x_hat
        OU[i] = est.u
        OX[i] = devo
        x = x + dt * cartpole_dynamics(p, x, u[0]) + w[i]
        xo = xo + dt * cartpole_dynamics(p, xo, est.u[0]) + w[i]
        if abs(x[2] - np.pi) > np.pi / 2:
            raise PoleDroppedError(
                f"pole dropped at t={(i + 1) * dt:.4f} s (step {i})")
        if abs(xo[2] - np.pi) > np.pi / 2:
            raise PoleDroppedError(
                f"pole dropped at t={(i + 1) * dt:.4f} s (step {i}, ideal loop)")
    return Trajectory(time=time, x=X, y=Y, x_hat=XH, oracle_x_hat=OXH,
                      z_hat=ZH, u=U, z=z, oracle_u=OU, oracle_x=OX,
                      spikes=list(st.spike_log), meta=_meta(sc))


def run_sparsity(sc: Scenario, lambdas=DEFAULT_LAMBDAS) -> SparsityResult:
    """Re-run the sparsity scenario once per leak value and count spikes."""
    lambdas = list(lambdas)
    if not lambdas:
        raise ValueError("lambdas must be nonempty")
    trajectories = [run_control(replace(sc, leak=float(lam))) for lam in lambdas]
    return SparsityResult(
        lambdas=[float(lam) for lam in lambdas],
        spike_counts=[t.spike_count for t in trajectories],
        trajectories=trajectories,
    )


def run_robustness_sweep(sc: Scenario, noise_grid=None, pulse_grid=None) -> SweepResult:
    """Grid of 5 s runs over (sensor noise, pulse magnitude).

    All cells share the same decoders and the same unit noise draws (scaled
    per cell), so differences across the grid reflect the swept parameters
    rather than sampling luck. The metric per cell is the time-mean absolute
    position error |x1 - z1| (RMSE is recorded alongside). A diverging cell
    is recorded as NaN and listed in failed_cells.
    """
    if sc.cost is None or sc.reference is None or sc.pulse is None:
        raise ValueError("sweep needs a cost, a reference and a pulse template")
    noise_grid = np.asarray(DEFAULT_NOISE_GRID if noise_grid is None else noise_grid,
                            dtype=float)
    pulse_grid = np.asarray(DEFAULT_PULSE_GRID if pulse_grid is None else pulse_grid,
                            dtype=float)
    if noise_grid.size == 0 or pulse_grid.size == 0:
        raise ValueError("grids must be nonempty")

    system = _linear_system(sc)
    kc = lqr_gain(system.A, system.B, sc.cost.Q, sc.cost.R)
    dec_x, dec_z = _decoders(sc, system.state_dim, need_z=True)

    n, dt = sc.n_steps, sc.dt
    time = np.arange(n) * dt
    z, zdot = sc.reference.sample_grid(n, dt)
    K = system.state_dim
    # Common random numbers: unit draws made once, scaled per cell.
    w_unit = make_rng(sc.master_seed, StreamLabel.DISTURBANCE).standard_normal((n, K))
    e_unit = make_rng(sc.master_seed, StreamLabel.SENSOR).standard_normal(
        (n, system.obs_dim))
    eta = np.sqrt(dt) * sc.eta_v * make_rng(
        sc.master_seed, StreamLabel.VOLTAGE).standard_normal((n, sc.n_neurons))
    w = np.sqrt(dt * sc.sigma_d) * w_unit

    shape = (noise_grid.size, pulse_grid.size)
    scn_mae = np.full(shape, np.nan)
    oracle_mae = np.full(shape, np.nan)
    scn_rmse = np.full(shape, np.nan)
    oracle_rmse = np.full(shape, np.nan)
    failed = []
    for a, sn in enumerate(noise_grid):
        cell_system = LinearSystem(A=system.A, B=system.B, C=system.C,
                                   sigma_d=system.sigma_d,
                                   sigma_n=sn * np.eye(system.obs_dim))
        kf = kalman_gain(system.A, system.C, system.sigma_d, cell_system.sigma_n)
        weights = build_controller(system, kf, kc, dec_x, dec_z, sc.leak)
        e = np.sqrt(sn) * e_unit
        for b, magnitude in enumerate(pulse_grid):
            pulse = PulseSchedule(onset=sc.pulse.onset, duration=sc.pulse.duration,
                                  magnitude=float(magnitude)).profile(time)
            try:
                cell = _sweep_cell(cell_system, kf, kc, weights, dec_x, dec_z,
                                   z, zdot, w, e, eta, pulse, sc.x0, dt, n)
            except NetworkDivergedError as err:
                failed.append((a, b, str(err)))
                continue
            scn_mae[a, b], oracle_mae[a, b], scn_rmse[a, b], oracle_rmse[a, b] = cell
    meta = _meta(sc, noise_grid=[float(v) for v in noise_grid],
                 pulse_grid=[float(v) for v in pulse_grid])
    return SweepResult(noise_grid=noise_grid, pulse_grid=pulse_grid,
                       scn_mae=scn_mae, oracle_mae=oracle_mae,
                       scn_rmse=scn_rmse, oracle_rmse=oracle_rmse,
                       failed_cells=failed, meta=meta)


def _sweep_cell(system, kf, kc, weights, dec_x, dec_z, z, zdot, w, e, eta,
                pulse, x0, dt, n):
    st = new_state(weights)
    est = LqgState(np.zeros(system.state_dim))
    A, B, C = system.A, system.B, system.C
    dxv, dzv = dec_x.values, dec_z.values
    err_s = np.empty(n)
    err_o = np.empty(n)
    x = x0.copy()
    xo = x0.copy()
    for i in range(n):
        y = C @ x + e[i]
        network_step(weights, st, dt, y=y, z=z[i], zdot=zdot[i], noise=eta[i])
        u = -(kc @ (dxv @ st.r - dzv @ st.r))
        yo = C @ xo + e[i]
        lqg_step(system, kf, kc, est, yo, z[i], dt)
        x = x + dt * (A @ x + B @ (u + pulse[i])) + w[i]
        xo = xo + dt * (A @ xo + B @ (est.u + pulse[i])) + w[i]
        err_s[i] = abs(x[0] - z[i, 0])
        err_o[i] = abs(xo[0] - z[i, 0])
    if not (np.isfinite(err_s).all() and np.isfinite(err_o).all()):
        raise NetworkDivergedError("loop diverged within the cell")
    return (float(err_s.mean()), float(err_o.mean()),
            float(np.sqrt(np.mean(err_s ** 2))), float(np.sqrt(np.mean(err_o ** 2))))


def summarize(traj: Trajectory) -> dict:
    """Scalar metrics for summary.json; everything JSON-serializable."""
    meta = traj.meta
    duration = float(meta.get("duration", traj.time[-1] + traj.time[1] - traj.time[0]
                              if len(traj.time) > 1 else 0.0))
    out = {
        "scenario": meta.get("scenario"),
        "master_seed": meta.get("master_seed"),
        "n_neurons": meta.get("n_neurons"),
        "dt": meta.get("dt"),
        "duration": duration,
        "leak": meta.get("leak"),
        "spike_count": traj.spike_count,
        "spikes_per_second": traj.spike_count / duration if duration else 0.0,
        "rmse_vs_oracle": _rmse(traj.x_hat[:, 0] - traj.oracle_x_hat[:, 0]),
        "artifact_choices": meta.get("artifact_choices", {}),
    }
    if traj.z is not None:
        err = traj.x[:, 0] - traj.z[:, 0]
        out["rmse_vs_reference"] = _rmse(err)
        out["mae_vs_reference"] = float(np.mean(np.abs(err)))
        out["phase_errors"] = _phase_errors(traj)
    else:
        # Estimation runs: the reference is the true plant state.
        err = traj.x_hat[:, 0] - traj.x[:, 0]
        out["rmse_vs_reference"] = _rmse(err)
        out["mae_vs_reference"] = float(np.mean(np.abs(err)))
    if meta.get("scenario") == "cartpole":
        out["max_pole_deviation"] = float(np.abs(traj.x[:, 2]).max())
    return out


def _rmse(err: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.asarray(err) ** 2)))


def _phase_errors(traj: Trajectory) -> list:
    """Position error per constant-reference segment."""
    times = traj.meta.get("artifact_choices", {}).get("reference_times")
    if not times:
        return []
    duration = float(traj.meta.get("duration", traj.time[-1]))
    bounds = [0.0] + [float(t) for t in times if t < duration] + [duration]
    phases = []
    for start, end in zip(bounds[:-1], bounds[1:]):
        mask = (traj.time >= start - 1e-9) & (traj.time < end - 1e-9)
        if not mask.any():
            continue
        err = np.abs(traj.x[mask, 0] - traj.z[mask, 0])
        phases.append({
            "start": start, "end": end,
            "level": float(traj.z[mask, 0][-1]),
            "mae": float(err.mean()),
            "min_abs_error": float(err.min()),
        })
    return phases


def _fmt(value) -> str:
    return repr(float(value))


def write_trajectory(traj: Trajectory, path, stride: int = 1):
    """CSV with one row per recorded step (optionally strided)."""
    columns = [("time", traj.time.reshape(-1, 1)), ("x", traj.x), ("y", traj.y),
               ("xhat", traj.x_hat), ("zhat", traj.z_hat), ("u", traj.u),
               ("oracle_xhat", traj.oracle_x_hat), ("oracle_u", traj.oracle_u),
               ("oracle_x", traj.oracle_x), ("z", traj.z)]
    columns = [(name, arr) for name, arr in columns if arr is not None]
    header = []
    for name, arr in columns:
        if name == "time":
            header.append("time")
        else:
            header.extend(f"{name}{j + 1}" for j in range(arr.shape[1]))
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(0, len(traj.time), stride):
            row = []
            for _, arr in columns:
                row.extend(_fmt(v) for v in arr[i])
            fh.write(",".join(row) + "\n")


def write_spikes(traj: Trajectory, path):
    with open(path, "w") as fh:
        fh.write("time,neuron\n")
        for t, j in traj.spikes:
            fh.write(f"{_fmt(t)},{int(j)}\n")


def write_summary(summary: dict, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep_matrix(matrix: np.ndarray, noise_grid, pulse_grid, path):
    """Matrix CSV: rows = sensor-noise values, columns = pulse magnitudes."""
    with open(path, "w") as fh:
        fh.write("sigma_n\\pulse," + ",".join(_fmt(p) for p in pulse_grid) + "\n")
        for sn, row in zip(noise_grid, matrix):
            fh.write(_fmt(sn) + "," + ",".join(_fmt(v) for v in row) + "\n")
