"""Quadcopter attitude simulation under adaptive twisting sliding-mode control.

The plant integrates Euler angles and Euler-angle rates: the angular
acceleration is the inertia-scaled sum of gyroscopic moments, control torque,
and disturbance torque. The attitude controller combines a model-based
equivalent torque with a twisting term whose gain adapts online; an optional
outer position loop turns waypoint trajectories into attitude references for
formation flights.

Integration is fixed-step RK4 (default 1 ms): the switching control punishes
adaptive steppers and a fixed step keeps traces reproducible.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .validation import ValidationError, as_vector, check_path

GRAVITY = 9.81
#: Gains never drop below this, keeping the twisting term alive.
GAIN_FLOOR = 1e-6
#: Pitch must stay this far from the +-pi/2 transform singularity.
PITCH_GUARD = 1e-3
#: Abort threshold for the sliding variables.
DIVERGENCE_LIMIT = 1e3


class SingularityError(RuntimeError):
    """Pitch approached the Euler-rate transform singularity."""


class DivergenceError(RuntimeError):
    """A sliding variable exceeded the divergence guard."""


def _axis_vector(value, name):
    v = np.asarray(value, dtype=float)
    if v.shape == ():
        v = np.full(3, float(v))
    return as_vector(v, 3, name)


@dataclass(frozen=True)
class QuadParams:
    """Diagonal inertia of one quadcopter, kg m^2."""

    inertia_xx: float = 0.01
    inertia_yy: float = 0.01
    inertia_zz: float = 0.02

    def __post_init__(self):
        if min(self.inertia_xx, self.inertia_yy, self.inertia_zz) <= 0:
            raise ValidationError("inertias must be positive")

    @property
    def diagonal(self):
        return np.array([self.inertia_xx, self.inertia_yy, self.inertia_zz])


@dataclass(frozen=True)
class QuadState:
    """Attitude, attitude rates, and translational state of one UAV."""

    euler: np.ndarray = (0.0, 0.0, 0.0)
    euler_rates: np.ndarray = (0.0, 0.0, 0.0)
    position: np.ndarray = (0.0, 0.0, 0.0)
    velocity: np.ndarray = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("euler", "euler_rates", "position", "velocity"):
            object.__setattr__(self, name, as_vector(getattr(self, name), 3, name))


@dataclass(frozen=True)
class AtsmConfig:
    """Per-axis controller parameters; scalars broadcast to all three axes.

    lam scales position error into the sliding variable, mu is the reduced
    twisting gain ratio, alpha0 the initial twisting gain. The adaptation law
    grows the gain at rate omega_bar*|sigma| outside the deadband, shrinks it
    inside, and regrows at eta once the gain falls to alpha_min.
    """

    lam: np.ndarray = 6.0
    mu: np.ndarray = 0.5
    alpha0: np.ndarray = 1.0
    alpha_min: np.ndarray = 0.5
    omega_bar: np.ndarray = 2.0
    epsilon: np.ndarray = 0.5
    rho: np.ndarray = 0.5
    eta: np.ndarray = 1.0
    boundary_layer: float = 0.0
    adaptation: bool = True

    def __post_init__(self):
        for name in ("lam", "mu", "alpha0", "alpha_min", "omega_bar",
                     "epsilon", "rho", "eta"):
            object.__setattr__(self, name, _axis_vector(getattr(self, name), name))
        if np.any(self.lam <= 0):
            raise ValidationError("lam must be positive")
        if np.any(self.mu <= 0) or np.any(self.mu >= 1):
            raise ValidationError("mu must lie strictly inside (0, 1)")
        if np.any(self.alpha0 <= 0):
            raise ValidationError("alpha0 must be positive")
        if np.any(self.eta <= 0):
            raise ValidationError("eta must be positive")
        if np.any(self.epsilon <= 0):
            raise ValidationError("epsilon must be positive")
        if self.boundary_layer < 0:
            raise ValidationError("boundary_layer must be non-negative")


@dataclass(frozen=True)
class SimTrace:
    """Fixed-step time series of one simulated flight."""

    t: np.ndarray
    euler: np.ndarray
    euler_rates: np.ndarray
    body_rates: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray
    torque: np.ndarray
    disturbance: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    dt: float


def body_rates_from_euler_rates(euler, euler_rates):
    """Body angular rates from Euler angles and their time derivatives."""
    euler = as_vector(euler, 3, "euler")
    rates = as_vector(euler_rates, 3, "euler_rates")
    phi, theta = euler[0], euler[1]
    if abs(theta) >= math.pi / 2 - PITCH_GUARD:
        raise SingularityError(f"pitch {theta:.4f} rad too close to +-pi/2")
    sph, cph = math.sin(phi), math.cos(phi)
    sth, cth = math.sin(theta), math.cos(theta)
    w = np.array([
        [1.0, 0.0, -sth],
        [0.0, cph, cth * sph],
        [0.0, -sph, cth * cph],
    ])
    return w @ rates


def gyroscopic_moments(params: QuadParams, body_rates):
    """Inertia cross-coupling moments for the given body rates."""
    p, q, r = as_vector(body_rates, 3, "body_rates")
    return np.array([
        (params.inertia_yy - params.inertia_zz) * q * r,
        (params.inertia_zz - params.inertia_xx) * p * r,
        (params.inertia_xx - params.inertia_yy) * p * q,
    ])


def sliding_variable(error, error_rate, lam):
    """Componentwise sliding variable: error_rate + lam * error."""
    return np.asarray(error_rate, dtype=float) + np.asarray(lam, dtype=float) * np.asarray(error, dtype=float)


def equivalent_control(params: QuadParams, reference_accel, error_rate, lam, gyroscopic):
    """Model-based torque that nulls the sliding-variable rate at zero disturbance."""
    ref_acc = as_vector(reference_accel, 3, "reference_accel")
    edot = as_vector(error_rate, 3, "error_rate")
    lam = _axis_vector(lam, "lam")
    return params.diagonal * (ref_acc - lam * edot) - as_vector(gyroscopic, 3, "gyroscopic")


def _signum(sigma, boundary_layer):
    if boundary_layer > 0.0:
        return float(np.clip(sigma / boundary_layer, -1.0, 1.0))
    if sigma > 0.0:
        return 1.0
    if sigma < 0.0:
        return -1.0
    return 0.0


def twisting_control(sigma, sigma_rate, alpha, mu, boundary_layer=0.0):
    """Twisting torque: reduced gain while converging to the surface, full gain otherwise."""
    if alpha <= 0.0:
        raise ValidationError("alpha must be positive")
    if not (0.0 < mu < 1.0):
        raise ValidationError("mu must lie strictly inside (0, 1)")
    s = _signum(sigma, boundary_layer)
    if sigma * sigma_rate <= 0.0:
        return -mu * alpha * s
    return -alpha * s


def adapt_gain(alpha, sigma, omega_bar, epsilon, rho, eta, alpha_min, dt):
    """One explicit-Euler update of the twisting gain adaptation law."""
    if dt <= 0.0:
        raise ValidationError("dt must be positive")
    if alpha > alpha_min:
        gap = abs(sigma) ** rho - epsilon
        rate = omega_bar * abs(sigma) * (1.0 if gap > 0.0 else (-1.0 if gap < 0.0 else 0.0))
    else:
        rate = eta
    return max(alpha + rate * dt, GAIN_FLOOR)


def _adapt_gains(alpha, sigma, config: AtsmConfig, dt):
    gap = np.abs(sigma) ** config.rho - config.epsilon
    rate = config.omega_bar * np.abs(sigma) * np.sign(gap)
    rate = np.where(alpha > config.alpha_min, rate, config.eta)
    return np.maximum(alpha + rate * dt, GAIN_FLOOR)


def _angular_accel(euler, euler_rates, params, total_torque):
    omega = body_rates_from_euler_rates(euler, euler_rates)
    return (gyroscopic_moments(params, omega) + total_torque) / params.diagonal


def step_dynamics(state: QuadState, torque, disturbance, params: QuadParams, dt) -> QuadState:
    """One RK4 step of the attitude dynamics under constant torque and disturbance.

    Translation is untouched here; the formation simulator advances it
    separately. Torque and disturbance are summed once so a disturbance folded
    into the torque argument produces a bitwise-identical trajectory.
    """
    if not (0.0 < dt <= 0.01):
        raise ValidationError(f"dt must lie in (0, 0.01], got {dt}")
    total = as_vector(torque, 3, "torque") + as_vector(disturbance, 3, "disturbance")

    def deriv(euler, rates):
        return rates, _angular_accel(euler, rates, params, total)

    e0, r0 = state.euler, state.euler_rates
    k1e, k1r = deriv(e0, r0)
    k2e, k2r = deriv(e0 + 0.5 * dt * k1e, r0 + 0.5 * dt * k1r)
    k3e, k3r = deriv(e0 + 0.5 * dt * k2e, r0 + 0.5 * dt * k2r)
    k4e, k4r = deriv(e0 + dt * k3e, r0 + dt * k3r)
    euler = e0 + (dt / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
    rates = r0 + (dt / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
    return replace(state, euler=euler, euler_rates=rates)


def step_reference_profile(steps):
    """Piecewise-constant attitude reference from (time, (phi, theta, psi)) entries.

    Each entry replaces the full target from its time onward; before the first
    entry the target is level zero attitude.
    """
    entries = sorted((float(t), as_vector(v, 3, "reference")) for t, v in steps)

    def reference(t):
        current = np.zeros(3)
        for t_step, value in entries:
            if t >= t_step:
                current = value
            else:
                break
        return current

    return reference


def sinusoidal_disturbance(amplitude=0.1, frequency=1.0):
    """Bounded torque disturbance applied identically on all three axes."""

    def disturbance(t):
        return np.full(3, amplitude * math.sin(2.0 * math.pi * frequency * t))

    return disturbance


class _AttitudeLoop:
    """Per-step ATSM torque computation with gain adaptation."""

    def __init__(self, config: AtsmConfig, params: QuadParams):
        self.config = config
        self.params = params
        self.alpha = config.alpha0.copy()
        self.prev_torque = np.zeros(3)

    def compute(self, state: QuadState, target, disturbance_now, dt):
        cfg = self.config
        error = state.euler - target
        error_rate = state.euler_rates  # piecewise-constant targets: zero rate
        sigma = sliding_variable(error, error_rate, cfg.lam)
        if np.any(np.abs(sigma) > DIVERGENCE_LIMIT):
            raise DivergenceError(f"|sigma| exceeded {DIVERGENCE_LIMIT:g}: {sigma}")

        omega = body_rates_from_euler_rates(state.euler, state.euler_rates)
        gyro = gyroscopic_moments(self.params, omega)
        # sliding-variable rate from the currently applied torque (analytic,
        # not finite-differenced)
        accel = (gyro + self.prev_torque + disturbance_now) / self.params.diagonal
        sigma_rate = accel + cfg.lam * error_rate

        u_eq = equivalent_control(self.params, np.zeros(3), error_rate, cfg.lam, gyro)
        u_tw = np.array([
            twisting_control(sigma[i], sigma_rate[i], float(self.alpha[i]),
                             float(cfg.mu[i]), cfg.boundary_layer)
            for i in range(3)
        ])
        torque = u_eq + u_tw
        alpha_now = self.alpha.copy()
        if cfg.adaptation:
            self.alpha = _adapt_gains(self.alpha, sigma, cfg, dt)
        self.prev_torque = torque
        return torque, sigma, alpha_now


def simulate_attitude_tracking(references, disturbance=None, config=None,
                               params=None, dt=1e-3, duration=5.0) -> SimTrace:
    """Closed-loop attitude tracking of piecewise-constant references.

    ``references`` is either a callable t -> target triple or a list of
    (time, (phi, theta, psi)) step entries. ``disturbance`` is a callable
    t -> torque triple (None means no disturbance).
    """
    config = config if config is not None else AtsmConfig()
    params = params if params is not None else QuadParams()
    if callable(references):
        reference = references
    else:
        reference = step_reference_profile(references)
    if disturbance is None:
        disturbance = lambda t: np.zeros(3)

    n_steps = int(round(duration / dt))
    state = QuadState()
    loop = _AttitudeLoop(config, params)

    shape = (n_steps + 1, 3)
    rec = {name: np.zeros(shape) for name in
           ("euler", "euler_rates", "body_rates", "sigma", "alpha",
            "torque", "disturbance", "position", "velocity")}
    times = np.arange(n_steps + 1) * dt

    for k in range(n_steps + 1):
        t = k * dt
        target = reference(t)
        d_now = np.asarray(disturbance(t), dtype=float)
        torque, sigma, alpha = loop.compute(state, target, d_now, dt)
        rec["euler"][k] = state.euler
        rec["euler_rates"][k] = state.euler_rates
        rec["body_rates"][k] = body_rates_from_euler_rates(state.euler, state.euler_rates)
        rec["sigma"][k] = sigma
        rec["alpha"][k] = alpha
        rec["torque"][k] = torque
        rec["disturbance"][k] = d_now
        if k < n_steps:
            state = step_dynamics(state, torque, d_now, params, dt)

    return SimTrace(t=times, dt=dt, **rec)


def _path_reference(path, speed):
    """Constant-speed reference along a waypoint polyline; holds the endpoint."""
    pts = check_path(path)
    seg = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cum[-1])

    def reference(t):
        s = speed * t
        if s >= total or total == 0.0:
            return pts[-1].copy(), np.zeros(3)
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(i, len(seg_len) - 1)
        if seg_len[i] == 0.0:
            return pts[i].copy(), np.zeros(3)
        frac = (s - cum[i]) / seg_len[i]
        direction = seg[i] / seg_len[i]
        return pts[i] + frac * seg[i], speed * direction

    return reference, total


def simulate_formation_flight(uav_paths, config=None, params=None, speed=2.0,
                              dt=1e-3, duration=None, position_gains=(4.0, 4.0),
                              tilt_limit=0.3, disturbance=None):
    """Fly each UAV along its waypoint path; returns (traces, tracking_errors).

    An outer PD loop on position produces desired accelerations, converted to
    small-angle roll/pitch references (clamped to ``tilt_limit``) for the inner
    attitude loop; lateral acceleration follows the achieved attitude and
    vertical acceleration is applied directly. ``tracking_errors`` holds one
    (steps+1, 3) planned-minus-flown array per UAV.
    """
    config = config if config is not None else AtsmConfig()
    params = params if params is not None else QuadParams()
    kp, kd = position_gains
    if disturbance is None:
        disturbance = lambda t: np.zeros(3)

    refs = []
    longest = 0.0
    for path in uav_paths:
        reference, total = _path_reference(path, speed)
        refs.append(reference)
        longest = max(longest, total)
    if duration is None:
        duration = longest / speed + 2.0
    n_steps = int(round(duration / dt))

    traces = []
    errors = []
    for path, reference in zip(uav_paths, refs):
        pts = check_path(path)
        state = QuadState(position=pts[0])
        loop = _AttitudeLoop(config, params)
        shape = (n_steps + 1, 3)
        rec = {name: np.zeros(shape) for name in
               ("euler", "euler_rates", "body_rates", "sigma", "alpha",
                "torque", "disturbance", "position", "velocity")}
        err = np.zeros(shape)
        times = np.arange(n_steps + 1) * dt

        for k in range(n_steps + 1):
            t = k * dt
            target_pos, target_vel = reference(t)
            acc_cmd = kp * (target_pos - state.position) + kd * (target_vel - state.velocity)
            att_target = np.array([
                np.clip(-acc_cmd[1] / GRAVITY, -tilt_limit, tilt_limit),
                np.clip(acc_cmd[0] / GRAVITY, -tilt_limit, tilt_limit),
                0.0,
            ])
            d_now = np.asarray(disturbance(t), dtype=float)
            torque, sigma, alpha = loop.compute(state, att_target, d_now, dt)

            rec["euler"][k] = state.euler
            rec["euler_rates"][k] = state.euler_rates
            rec["body_rates"][k] = body_rates_from_euler_rates(state.euler, state.euler_rates)
            rec["sigma"][k] = sigma
            rec["alpha"][k] = alpha
            rec["torque"][k] = torque
            rec["disturbance"][k] = d_now
            rec["position"][k] = state.position
            rec["velocity"][k] = state.velocity
            err[k] = target_pos - state.position

            if k < n_steps:
                new_state = step_dynamics(state, torque, d_now, params, dt)
                accel = np.array([
                    GRAVITY * new_state.euler[1],
                    -GRAVITY * new_state.euler[0],
                    acc_cmd[2],
                ])
                velocity = state.velocity + accel * dt
                position = state.position + velocity * dt
                state = replace(new_state, position=position, velocity=velocity)

        traces.append(SimTrace(t=times, dt=dt, **rec))
        errors.append(err)
    return traces, errors
