"""Spike coding networks built in closed form from a plant model and LQG gains.

Each neuron's voltage tracks a projection of the coding error; a spike is fired
only when it shrinks that error (greedy rule), which yields the usual fast
inhibition -D'D, thresholds |D_i|^2/2, and slow recurrence embedding the plant
dynamics and the Kalman/control feedback through the filtered spike trains.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .state_space import LinearSystem, StreamLabel, make_rng


class NetworkDivergedError(RuntimeError):
    pass


@dataclass
class DecoderMatrix:
    """Decoder with columns of equal norm; x_hat = values @ r."""

    values: np.ndarray
    column_norm: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("decoder must be a 2-D matrix")
        norms = np.linalg.norm(self.values, axis=0)
        if np.abs(norms - self.column_norm).max() > 1e-12:
            raise ValueError(
                f"decoder columns must all have norm {self.column_norm}"
            )

    @property
    def dim(self):
        return self.values.shape[0]

    @property
    def n_neurons(self):
        return self.values.shape[1]


def sample_decoder(dim: int, n_neurons: int, column_norm: float,
                   seed: int = None, rng: np.random.Generator = None) -> DecoderMatrix:
    """Sample a decoder with standard-normal directions scaled to `column_norm`.

    Pass `rng` to draw from an existing stream (successive calls then yield
    distinct matrices); pass `seed` for a self-contained deterministic draw.
    """
    if rng is None:
        if seed is None:
            raise ValueError("provide either seed or rng")
        rng = make_rng(seed, StreamLabel.DECODER)
    values = rng.standard_normal((dim, n_neurons))
    values = column_norm * values / np.linalg.norm(values, axis=0)
    return DecoderMatrix(values=values, column_norm=float(column_norm))


@dataclass
class ScnWeights:
    """Analytic network weights; matrices not used by `mode` are None.

    Modes: 'autoencoder' (external signal + derivative), 'autonomous'
    (embedded dynamics, no input), 'estimator' (observation + known input),
    'controller' (observation + target, control readout).
    """

    mode: str
    decoder_x: DecoderMatrix
    thresholds: np.ndarray
    leak: float
    decoder_z: DecoderMatrix = None
    fast_x: np.ndarray = None          # -Dx' Dx, applied on every spike
    fast_z: np.ndarray = None          # -Dz' Dz, controller only
    slow_dynamics: np.ndarray = None   # Dx' (A + leak I) Dx
    slow_kalman: np.ndarray = None     # Dx' K_f C Dx
    slow_control: np.ndarray = None    # -Dx' B K_c Dx
    slow_target: np.ndarray = None     # Dx' B K_c Dz
    obs_in: np.ndarray = None          # -Dx' K_f
    drive_in: np.ndarray = None        # Dx' B, estimator only
    target_in: np.ndarray = None       # Dz', controller only
    readout_u: np.ndarray = None       # -K_c (Dx - Dz), controller only
    control_gain: np.ndarray = None    # K_c, kept so u = -K_c(x_hat - z_hat) exactly
    _w_slow: np.ndarray = field(default=None, init=False, repr=False)
    _fast_total: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        slow_parts = [m for m in (self.slow_dynamics, self.slow_kalman,
                                  self.slow_control, self.slow_target) if m is not None]
        if slow_parts:
            self._w_slow = np.ascontiguousarray(sum(slow_parts))
        if self.fast_x is not None:
            total = self.fast_x if self.fast_z is None else self.fast_x + self.fast_z
            self._fast_total = np.ascontiguousarray(total)

    @property
    def n_neurons(self):
        return self.decoder_x.n_neurons


def build_autoencoder(decoder: DecoderMatrix, leak: float) -> ScnWeights:
    """Network that re-encodes an external signal fed as (signal, signal_dot)."""
    D = decoder.values
    return ScnWeights(
        mode="autoencoder",
        decoder_x=decoder,
        fast_x=-D.T @ D,
        thresholds=0.5 * np.sum(D * D, axis=0),
        leak=float(leak),
    )


def build_dynamics_network(A, decoder: DecoderMatrix, leak: float) -> ScnWeights:
    """Autonomous network whose decode follows dx/dt = A x."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    D = decoder.values
    if A.shape[0] != decoder.dim:
        raise ValueError("dynamics dimension does not match decoder")
    return ScnWeights(
        mode="autonomous",
        decoder_x=decoder,
        fast_x=-D.T @ D,
        slow_dynamics=D.T @ (A + leak * np.eye(A.shape[0])) @ D,
        thresholds=0.5 * np.sum(D * D, axis=0),
        leak=float(leak),
    )


def build_estimator(system: LinearSystem, kalman_gain, decoder: DecoderMatrix,
                    leak: float) -> ScnWeights:
    """Spiking Kalman filter: decode of r tracks the optimal estimate of x."""
    Kf = np.atleast_2d(np.asarray(kalman_gain, dtype=float))
    D = decoder.values
    if decoder.dim != system.state_dim:
        raise ValueError("decoder dimension does not match system state")
    if Kf.shape != (system.state_dim, system.obs_dim):
        raise ValueError("Kalman gain shape does not match system")
    eye = np.eye(system.state_dim)
    return ScnWeights(
        mode="estimator",
        decoder_x=decoder,
        fast_x=-D.T @ D,
        slow_dynamics=D.T @ (system.A + leak * eye) @ D,
        slow_kalman=D.T @ Kf @ system.C @ D,
        obs_in=-D.T @ Kf,
        drive_in=D.T @ system.B,
        thresholds=0.5 * np.sum(D * D, axis=0),
        leak=float(leak),
    )


def build_controller(system: LinearSystem, kalman_gain, lqr_gain,
                     decoder_x: DecoderMatrix, decoder_z: DecoderMatrix,
                     leak: float) -> ScnWeights:
    """Spiking LQG controller: the network filters y, encodes the target z,
    and reads out u = readout_u @ r = -K_c (x_hat - z_hat)."""
    Kf = np.atleast_2d(np.asarray(kalman_gain, dtype=float))
    Kc = np.atleast_2d(np.asarray(lqr_gain, dtype=float))
    Dx, Dz = decoder_x.values, decoder_z.values
    if decoder_x.dim != system.state_dim or decoder_z.dim != system.state_dim:
        raise ValueError("decoder dimensions must match system state")
    if decoder_x.n_neurons != decoder_z.n_neurons:
        raise ValueError("state and target decoders must share the population")
    eye = np.eye(system.state_dim)
    BKc = system.B @ Kc
    return ScnWeights(
        mode="controller",
        decoder_x=decoder_x,
        decoder_z=decoder_z,
        fast_x=-Dx.T @ Dx,
        fast_z=-Dz.T @ Dz,
        slow_dynamics=Dx.T @ (system.A + leak * eye) @ Dx,
        slow_kalman=Dx.T @ Kf @ system.C @ Dx,
        slow_control=-Dx.T @ BKc @ Dx,
        slow_target=Dx.T @ BKc @ Dz,
        obs_in=-Dx.T @ Kf,
        target_in=Dz.T.copy(),
        readout_u=-Kc @ (Dx - Dz),
        control_gain=Kc,
        thresholds=0.5 * (np.sum(Dx * Dx, axis=0) + np.sum(Dz * Dz, axis=0)),
        leak=float(leak),
    )


@dataclass
class ScnState:
    v: np.ndarray
    r: np.ndarray
    silenced: np.ndarray
    spike_log: list
    t: float = 0.0
    step: int = 0
    any_silenced: bool = False
    silence_log: list = field(default_factory=list)


def new_state(weights: ScnWeights) -> ScnState:
    n = weights.n_neurons
    return ScnState(
        v=np.zeros(n), r=np.zeros(n), silenced=np.zeros(n, dtype=bool), spike_log=[]
    )


def silence(state: ScnState, neuron_ids, t: float = None) -> ScnState:
    """Bar the given neurons from spiking (their voltages keep integrating)."""
    ids = np.atleast_1d(np.asarray(neuron_ids, dtype=int))
    n = state.v.size
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise ValueError(f"neuron ids out of range for population of {n}")
    state.silenced[ids] = True
    state.any_silenced = True
    state.silence_log.append((state.t if t is None else float(t), tuple(int(i) for i in ids)))
    return state


def network_step(weights: ScnWeights, state: ScnState, dt: float, *,
                 y=None, u=None, z=None, zdot=None,
                 signal=None, signal_dot=None, noise=None):
    """Advance the network one Euler step; at most one neuron spikes.

    Inputs by mode — estimator: y, u; controller: y, z, zdot; autoencoder:
    signal, signal_dot; autonomous: none. `noise` is an optional per-step
    additive voltage-noise vector (already scaled by the caller).

    Returns (state, spiked neuron index or None); `state` is mutated in place.
    """
    mode = weights.mode
    v = state.v
    r = state.r
    if mode == "controller":
        if y is None or z is None or zdot is None:
            raise ValueError("controller step needs y, z and zdot")
        drive = weights._w_slow @ r + weights.obs_in @ y \
            + weights.target_in @ (zdot + weights.leak * z)
    elif mode == "estimator":
        if y is None or u is None:
            raise ValueError("estimator step needs y and u")
        drive = weights._w_slow @ r + weights.obs_in @ y + weights.drive_in @ u
    elif mode == "autoencoder":
        if signal is None or signal_dot is None:
            raise ValueError("autoencoder step needs signal and signal_dot")
        drive = weights.decoder_x.values.T @ (signal_dot + weights.leak * signal)
    elif mode == "autonomous":
        drive = weights._w_slow @ r
    else:
        raise ValueError(f"unknown network mode {mode!r}")

    v += dt * (drive - weights.leak * v)
    if noise is not None:
        v += noise
    if not np.all(np.isfinite(v)):
        raise NetworkDivergedError(
            f"network diverged at step {state.step} (t={state.t:.6g})"
        )
    r *= 1.0 - weights.leak * dt

    excess = v - weights.thresholds
    if state.any_silenced:
        excess[state.silenced] = -np.inf
    winner = int(np.argmax(excess))
    spike = None
    if excess[winner] > 0.0:
        v += weights._fast_total[:, winner]
        r[winner] += 1.0
        state.spike_log.append((state.t, winner))
        spike = winner
    state.t += dt
    state.step += 1
    return state, spike


@dataclass
class Readout:
    x_hat: np.ndarray
    z_hat: np.ndarray = None
    u: np.ndarray = None


def decode(weights: ScnWeights, state: ScnState) -> Readout:
    """Decode the state estimate (and, for controllers, target and control).

    The control readout is evaluated as -K_c (x_hat - z_hat), the factored
    form of readout_u @ r; the two agree to float precision, but the factored
    form keeps u consistent with the recorded decodes bit-for-bit.
    """
    x_hat = weights.decoder_x.values @ state.r
    if weights.mode != "controller":
        return Readout(x_hat=x_hat)
    z_hat = weights.decoder_z.values @ state.r
    return Readout(
        x_hat=x_hat,
        z_hat=z_hat,
        u=-(weights.control_gain @ (x_hat - z_hat)),
    )


_MATRIX_FIELDS = (
    "fast_x", "fast_z", "slow_dynamics", "slow_kalman", "slow_control",
    "slow_target", "obs_in", "drive_in", "target_in", "readout_u",
    "control_gain",
)


def save_weights(weights: ScnWeights, path):
    """Write the network to a self-describing JSON file (exact roundtrip)."""
    doc = {
        "format": "scn-weights",
        "version": 1,
        "mode": weights.mode,
        "leak": weights.leak,
        "n_neurons": weights.n_neurons,
        "state_dim": weights.decoder_x.dim,
        "thresholds": list(weights.thresholds),
        "decoder_x": _encode_decoder(weights.decoder_x),
        "decoder_z": _encode_decoder(weights.decoder_z),
        "matrices": {
            name: _encode_matrix(getattr(weights, name)) for name in _MATRIX_FIELDS
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_weights(path) -> ScnWeights:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "scn-weights" or doc.get("version") != 1:
        raise ValueError(f"{path} is not a version-1 scn-weights file")
    kwargs = {name: _decode_matrix(doc["matrices"][name]) for name in _MATRIX_FIELDS}
    return ScnWeights(
        mode=doc["mode"],
        decoder_x=_decode_decoder(doc["decoder_x"]),
        decoder_z=_decode_decoder(doc["decoder_z"]),
        thresholds=np.array(doc["thresholds"], dtype=float),
        leak=float(doc["leak"]),
        **kwargs,
    )


def _encode_matrix(mat):
    if mat is None:
        return None
    return {"shape": list(mat.shape), "data": [list(row) for row in np.asarray(mat)]}


def _decode_matrix(doc):
    if doc is None:
        return None
    return np.array(doc["data"], dtype=float).reshape(doc["shape"])


def _encode_decoder(dec):
    if dec is None:
        return None
    out = _encode_matrix(dec.values)
    out["column_norm"] = dec.column_norm
    return out


def _decode_decoder(doc):
    if doc is None:
        return None
    return DecoderMatrix(values=_decode_matrix(doc), column_norm=doc["column_norm"])
