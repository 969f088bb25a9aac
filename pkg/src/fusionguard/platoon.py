"""Closed-loop vehicle platoon driven by fused spacing measurements.

A string of m followers tracks a virtual reference vehicle. Each follower i
carries the state x_i = (e_i, v_i, a_i, u_i): spacing error against the
constant-time-headway policy d_ref = r + h * v_i, own velocity, acceleration,
and controller state. The controller feeds back the predecessor's velocity,
acceleration, and input over a (noisy) link, plus the follower's own spacing
measurement. The spacing is not read off one trusted sensor: a bank of N
redundant range sensors measures d_i = e_i + r + h * v_i, up to q of them may
be attacked, and the fused estimate enters the loop. The fusion error e_sigma
therefore acts as a bounded disturbance on an otherwise linear system:

    x_i'  = A_c x_i + B w_i,
    w_i   = (e_sigma_i, v_{i-1} + w_v, a_{i-1} + w_a, u_{i-1} + w_u)

and the reference runs x_0' = A_0 x_0 + b_0 * xi_0 with a piecewise-constant
commanded input xi_0. With the published gains A_c is Hurwitz, so bounded
fusion errors and channel noise keep every state bounded.

Integration is classical fixed-step RK4 on the stacked reference+follower
system. Stochastic inputs (fusion error, channel noise) and xi_0 are sampled
at the start of each step and held across it; the predecessor coupling is
part of the stacked state and is evaluated at the RK4 stage values, which
preserves fourth-order convergence.
"""
from __future__ import annotations

import warnings
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .fusion import enumerate_subsets, fuse
from .scenario import (
    STREAM_CHANNEL,
    STREAM_MEASUREMENT,
    ChannelNoise,
    make_rng_stream,
    sample_measurements,
)

# state vector layout, shared by followers and reference
STATE_SPACING_ERROR = 0
STATE_VELOCITY = 1
STATE_ACCELERATION = 2
STATE_INPUT = 3


class SimulationDiverged(RuntimeError):
    """Raised when the integrated state stops being finite."""


@dataclass(frozen=True)
class PlatoonParams:
    """Physical and controller parameters of a homogeneous platoon.

    vehicles is the follower count m (the reference is extra). headway h and
    engine_lag tau are in seconds, standstill r in meters. Gains must satisfy
    k_p, k_d, k_dd > 0 and k_d > k_p * engine_lag for the following objective;
    violations warn but do not block construction, so degenerate parameter
    sets stay inspectable. hinf_gain is the reported disturbance attenuation
    level of the gain synthesis, carried as metadata only.
    """

    vehicles: int
    headway: float
    engine_lag: float
    standstill: float = 2.0
    k_p: float = 0.8700
    k_d: float = 11.1683
    k_dd: float = 0.0009
    hinf_gain: float | None = None

    def __post_init__(self):
        if int(self.vehicles) != self.vehicles or self.vehicles < 2:
            raise ValueError(f"vehicles must be an integer >= 2, got {self.vehicles!r}")
        if self.headway <= 0:
            raise ValueError(f"headway must be > 0, got {self.headway!r}")
        if self.engine_lag <= 0:
            raise ValueError(f"engine_lag must be > 0, got {self.engine_lag!r}")
        if self.standstill < 0:
            raise ValueError(f"standstill must be >= 0, got {self.standstill!r}")
        if (
            self.k_p <= 0
            or self.k_d <= 0
            or self.k_dd <= 0
            or self.k_d <= self.k_p * self.engine_lag
        ):
            warnings.warn(
                "gain conditions violated (need k_p, k_d, k_dd > 0 and "
                "k_d > k_p * engine_lag); the following objective is not guaranteed",
                stacklevel=2,
            )


@dataclass(frozen=True)
class InputSchedule:
    """Piecewise-constant commanded input, left-closed segments [t_k, t_{k+1})."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) == 0:
            raise ValueError("times and values must be nonempty and equally long")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("schedule times must be strictly increasing")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def value_at(self, t: float) -> float:
        k = bisect_right(self.times, t) - 1
        return 0.0 if k < 0 else self.values[k]


def closed_loop_matrix(params: PlatoonParams) -> np.ndarray:
    """Follower state matrix A_c under the headway policy and feedback gains."""
    h, tau = params.headway, params.engine_lag
    kp, kd, kdd = params.k_p, params.k_d, params.k_dd
    return np.array([
        [0.0, -1.0, -h, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, -1.0 / tau, 1.0 / tau],
        [kp / h, -kd / h, -kd - kdd * (h - tau) / (h * tau), -(kdd * h + tau) / (h * tau)],
    ])


def disturbance_matrix(params: PlatoonParams) -> np.ndarray:
    """Gain B from (fusion error, predecessor v/a/u) into the follower state."""
    h = params.headway
    return np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [params.k_p / h, params.k_d / h, params.k_dd / h, 1.0 / h],
    ])


def reference_matrix(params: PlatoonParams) -> np.ndarray:
    """Reference vehicle state matrix A_0."""
    h, tau = params.headway, params.engine_lag
    return np.array([
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, -1.0 / tau, 1.0 / tau],
        [0.0, 0.0, 0.0, -1.0 / h],
    ])


def reference_input_gain(params: PlatoonParams) -> np.ndarray:
    """Gain b_0 from the commanded input xi_0 into the reference state.

    Positive xi_0 drives the controller state down, so the reference
    decelerates; flip the sign via negate_platoon_input to make positive
    commands accelerate.
    """
    return np.array([0.0, 0.0, 0.0, -1.0 / params.headway])


def follower_derivative(state, disturbance, params: PlatoonParams) -> np.ndarray:
    """x' = A_c x + B w for one follower."""
    x = np.asarray(state, dtype=float)
    w = np.asarray(disturbance, dtype=float)
    if x.shape != (4,) or w.shape != (4,):
        raise ValueError("state and disturbance must have shape (4,)")
    return closed_loop_matrix(params) @ x + disturbance_matrix(params) @ w


def reference_derivative(state, t: float, params: PlatoonParams,
                         schedule: InputSchedule, negate: bool = False) -> np.ndarray:
    """x_0' = A_0 x_0 + b_0 xi_0(t) for the virtual reference."""
    x = np.asarray(state, dtype=float)
    if x.shape != (4,):
        raise ValueError("reference state must have shape (4,)")
    xi = schedule.value_at(t)
    if negate:
        xi = -xi
    return reference_matrix(params) @ x + reference_input_gain(params) * xi


def rk4_step(f, t: float, state: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of x' = f(t, x)."""
    k1 = f(t, state)
    k2 = f(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = f(t + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def eigenvalue_check(params: PlatoonParams) -> float:
    """Largest real part over the eigenvalues of the follower loop matrix."""
    return float(np.linalg.eigvals(closed_loop_matrix(params)).real.max())


@dataclass
class PlatoonTrajectory:
    """Everything one closed-loop run produced, sampled on the step grid.

    states[k, 0] is the reference, states[k, i] follower i for i >= 1.
    spacing arrays and sensor records cover followers only (column i-1 for
    follower i). selected_index indexes into subsets.
    """

    times: np.ndarray
    states: np.ndarray
    spacing_true: np.ndarray
    spacing_fused: np.ndarray
    fusion_error: np.ndarray
    selected_index: np.ndarray
    subsets: list[tuple[int, ...]]
    measurements: np.ndarray
    attacked_mask: np.ndarray
    hurwitz_margin: float
    params: PlatoonParams = field(repr=False, default=None)

    @property
    def n_followers(self) -> int:
        return self.states.shape[1] - 1


def simulate_platoon(cfg, rng_measurement=None, rng_channel=None) -> PlatoonTrajectory:
    """Integrate the platoon scenario described by ``cfg``.

    ``cfg`` is a ScenarioConfig with a platoon section; per-vehicle sensor
    banks share its fusion geometry, noise model, and attack schedule. Fresh
    default streams are derived from cfg.seed when generators are not given.
    Raises SimulationDiverged if any state stops being finite.
    """
    params = cfg.platoon
    if params is None:
        raise ValueError("config has no platoon section")
    if rng_measurement is None:
        rng_measurement = make_rng_stream(cfg.seed, STREAM_MEASUREMENT)
    if rng_channel is None:
        rng_channel = make_rng_stream(cfg.seed, STREAM_CHANNEL)
    schedule = cfg.reference_input if cfg.reference_input is not None else InputSchedule((0.0,), (0.0,))
    channel = cfg.channel_noise if cfg.channel_noise is not None else ChannelNoise()

    margin = eigenvalue_check(params)
    if margin >= 0:
        warnings.warn(
            f"closed loop is not Hurwitz (max eigenvalue real part {margin:.6g}); "
            "boundedness is not certified, running anyway",
            stacklevel=2,
        )

    m = params.vehicles
    n_sensors = cfg.fusion.n_sensors
    times = cfg.time.grid()
    n = times.size
    dt = cfg.time.dt
    negate = cfg.negate_platoon_input

    a_ref = reference_matrix(params)
    b_ref = reference_input_gain(params)
    a_fol = closed_loop_matrix(params)
    b_fol = disturbance_matrix(params)

    subsets = enumerate_subsets(n_sensors, cfg.fusion.subset_size)
    subset_pos = {sub: i for i, sub in enumerate(subsets)}

    states = np.empty((n, m + 1, 4))
    spacing_true = np.empty((n, m))
    spacing_fused = np.empty((n, m))
    fusion_error = np.empty((n, m))
    selected_index = np.empty((n, m), dtype=int)
    measurements = np.empty((n, m, n_sensors))
    attacked_mask = np.zeros((n, m, n_sensors), dtype=bool)

    X = np.zeros((m + 1, 4))
    for k in range(n):
        t = float(times[k])
        states[k] = X
        held = np.empty((m, 4))
        for i in range(m):
            x = X[i + 1]
            spacing = x[STATE_SPACING_ERROR] + params.standstill + params.headway * x[STATE_VELOCITY]
            sample = sample_measurements(t, spacing, cfg.noise, cfg.attack, rng_measurement)
            fused = fuse(sample.values, cfg.fusion)
            spacing_true[k, i] = spacing
            spacing_fused[k, i] = fused.fused_value
            fusion_error[k, i] = fused.fused_value - spacing
            selected_index[k, i] = subset_pos[fused.selected_subset]
            measurements[k, i] = sample.values
            for a in sample.attacked:
                attacked_mask[k, i, a - 1] = True
            w_v, w_a, w_u = channel.sample(rng_channel)
            held[i, 0] = fused.fused_value - spacing
            held[i, 1] = w_v
            held[i, 2] = w_a
            held[i, 3] = w_u
        if k == n - 1:
            break

        xi = schedule.value_at(t)
        if negate:
            xi = -xi

        def rhs(_, Y):
            dY = np.empty_like(Y)
            dY[0] = a_ref @ Y[0] + b_ref * xi
            w = held.copy()
            w[:, 1:] += Y[:-1, 1:]
            dY[1:] = Y[1:] @ a_fol.T + w @ b_fol.T
            return dY

        X = rk4_step(rhs, t, X, dt)
        if not np.all(np.isfinite(X)):
            raise SimulationDiverged(f"non-finite platoon state after the step at t = {t:.6g} s")

    return PlatoonTrajectory(
        times=times,
        states=states,
        spacing_true=spacing_true,
        spacing_fused=spacing_fused,
        fusion_error=fusion_error,
        selected_index=selected_index,
        subsets=subsets,
        measurements=measurements,
        attacked_mask=attacked_mask,
        hurwitz_margin=margin,
        params=params,
    )


__all__ = [
    "STATE_ACCELERATION",
    "STATE_INPUT",
    "STATE_SPACING_ERROR",
    "STATE_VELOCITY",
    "InputSchedule",
    "PlatoonParams",
    "PlatoonTrajectory",
    "SimulationDiverged",
    "closed_loop_matrix",
    "disturbance_matrix",
    "eigenvalue_check",
    "follower_derivative",
    "reference_derivative",
    "reference_input_gain",
    "reference_matrix",
    "rk4_step",
    "simulate_platoon",
]
