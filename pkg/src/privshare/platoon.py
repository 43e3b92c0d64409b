"""Mixed-autonomy platoon: leader + connected automated vehicle (CAV) + human
driven vehicle (HDV).

The HDV follows the Full Velocity Difference car-following law

    a = theta_1 * (V(s) - v) + theta_2 * (v_pred - v)

with the cosine optimal-velocity function V(s) (0 below ``s_st``, ``v_max``
above ``s_go``), which makes (s*, v*) = (20 m, 15 m/s) an exact equilibrium
under the default constants. The pair (theta_1, theta_2) is the sensitive
parameter.

The CAV runs a linear feedback law whose HDV-facing terms consume the
*shared* HDV data (speed, spacing) rather than the true values; this is the
feedback loop through which distorted sharing influences the platoon. Gain
slots and the signal each slot reads are configurable (see
:class:`ControllerGains`); the published slot gains are unstable under the
most literal signal assignment, so the default assignment is the
closest stable one:

    u = mu_L * (s1 - s*) + eta_L * (v0 - v*)      # leader gap / leader speed
      + mu_C * 0          + eta_C * (v0 - v1)      # self slot: leader speed tracking
      + mu_H * (s~ - s*)  + eta_H * (v~ - v*)      # shared HDV data

Discretization is explicit Euler for velocities with trapezoidal integration
for spacings (exact for piecewise-constant acceleration): a one-step leader
deceleration of a changes the leader gap by dt^2 * a / 2. The HDV acceleration
disturbance is white noise of intensity ``noise_std_a``; its per-step standard
deviation is ``noise_std_a * sqrt(dt)``.

Fuel and smoothness metrics are evaluated on the HDV's car-following
acceleration (the modeled response, after clamping, excluding the white
disturbance); this reproduces the reported equilibrium fuel scale of roughly
1.22-1.26 mL/s instead of the ~1.9 mL/s that including the raw disturbance
would give.

All shared/true HDV data vectors are ordered (speed, spacing).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class LeaderProfile(str, Enum):
    CONSTANT = "constant"
    SINE = "sine"
    BRAKE_PULSE = "brake_pulse"


@dataclass(frozen=True)
class ControllerGains:
    """Per-slot feedback gains (mu, eta) for the CAV's linear controller.

    ``self_spacing_signal`` selects what the self slot's mu multiplies:
    "none" (default, stable), "front_gap" (the literal reading; unstable with
    the published gains), or "shared_gap".
    """

    leader: tuple[float, float] = (0.1, 0.0)
    cav: tuple[float, float] = (-0.5, 0.5)
    hdv: tuple[float, float] = (-0.2, 0.2)
    self_spacing_signal: str = "none"

    def __post_init__(self):
        if self.self_spacing_signal not in ("none", "front_gap", "shared_gap"):
            raise ValueError(f"unknown self_spacing_signal {self.self_spacing_signal!r}")


@dataclass(frozen=True)
class EnvConfig:
    dt: float = 0.2
    s_star: float = 20.0
    v_star: float = 15.0
    s_st: float = 5.0
    s_go: float = 35.0
    a_min: float = -5.0
    a_max: float = 5.0
    v_max: float = 30.0
    noise_std_a: float = 1.0  # white-noise intensity; per-step std is noise_std_a*sqrt(dt)
    noise_std_s: float = 0.0
    gains: ControllerGains = field(default_factory=ControllerGains)
    theta_support: tuple[tuple[float, float], ...] = (
        (0.4, 0.5),
        (0.7, 0.8),
        (1.0, 1.1),
        (1.3, 1.4),
    )
    distortion_weights: tuple[float, float] = (3.0, 1.0)  # (speed, spacing)
    leader_profile: LeaderProfile = LeaderProfile.CONSTANT
    leader_amplitude: float = 1.0  # m/s for SINE; m/s^2 deceleration for BRAKE_PULSE
    leader_period: float = 10.0  # s, SINE period
    leader_pulse_start: int = 10  # step index, BRAKE_PULSE
    leader_pulse_steps: int = 5
    min_spacing: float = 0.1

    def __post_init__(self):
        if not (self.s_st < self.s_star < self.s_go):
            raise ValueError("require s_st < s_star < s_go")
        if not (self.a_min < 0.0 < self.a_max):
            raise ValueError("require a_min < 0 < a_max")
        w1, w2 = self.distortion_weights
        if not (w1 >= w2 > 0.0):
            raise ValueError("distortion weights must satisfy w_speed >= w_spacing > 0")
        for th in self.theta_support:
            if not (th[0] > 0 and th[1] > 0):
                raise ValueError("car-following gains must be positive")
        if not isinstance(self.leader_profile, LeaderProfile):
            object.__setattr__(self, "leader_profile", LeaderProfile(self.leader_profile))
        if not isinstance(self.gains, ControllerGains):
            object.__setattr__(self, "gains", ControllerGains(**self.gains))

    @property
    def theta_array(self) -> np.ndarray:
        return np.asarray(self.theta_support, dtype=float)

    @property
    def step_noise_std_a(self) -> float:
        return self.noise_std_a * float(np.sqrt(self.dt))


@dataclass(frozen=True)
class PlatoonState:
    """Spacings s = [leader->CAV, CAV->HDV] (m), velocities v = [v0, v1, v2] (m/s)."""

    s: np.ndarray
    v: np.ndarray
    t: int = 0

    def __post_init__(self):
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    @property
    def hdv_data(self) -> np.ndarray:
        """True HDV data vector (speed, spacing)."""
        return np.array([self.v[2], self.s[1]])


@dataclass(frozen=True)
class StepLog:
    a_cav: float
    a_hdv_model: float  # clamped car-following response; drives fuel/smoothness
    a_hdv_applied: float  # model response plus disturbance, clamped
    fuel: float
    v1_before: float
    v1_after: float
    v0_before: float
    v0_after: float
    safety_event: bool


def equilibrium_state(cfg: EnvConfig) -> PlatoonState:
    return PlatoonState(
        s=np.array([cfg.s_star, cfg.s_star]),
        v=np.array([cfg.v_star, cfg.v_star, cfg.v_star]),
        t=0,
    )


def desired_velocity(s, cfg: EnvConfig):
    """Cosine optimal-velocity function of the spacing."""
    s = np.asarray(s, dtype=float)
    x = np.clip((s - cfg.s_st) / (cfg.s_go - cfg.s_st), 0.0, 1.0)
    out = 0.5 * cfg.v_max * (1.0 - np.cos(np.pi * x))
    return float(out) if out.ndim == 0 else out


def fvd_acceleration(theta, s, v_self, v_pred, cfg: EnvConfig):
    """Car-following acceleration, clamped to [a_min, a_max]. Vectorizes over
    particle stacks when given array arguments."""
    theta = np.asarray(theta, dtype=float)
    t1 = theta[..., 0]
    t2 = theta[..., 1]
    a = t1 * (desired_velocity(s, cfg) - v_self) + t2 * (np.asarray(v_pred) - v_self)
    out = np.clip(a, cfg.a_min, cfg.a_max)
    return float(out) if np.ndim(out) == 0 else out


def cav_control(state: PlatoonState, shared_hdv: np.ndarray, cfg: EnvConfig) -> float:
    """Linear feedback; the HDV slot reads the shared (speed, spacing) pair."""
    g = cfg.gains
    v_shared, s_shared = float(shared_hdv[0]), float(shared_hdv[1])
    u = g.leader[0] * (state.s[0] - cfg.s_star) + g.leader[1] * (state.v[0] - cfg.v_star)
    if g.self_spacing_signal == "front_gap":
        u += g.cav[0] * (state.s[0] - cfg.s_star)
    elif g.self_spacing_signal == "shared_gap":
        u += g.cav[0] * (s_shared - cfg.s_star)
    u += g.cav[1] * (state.v[0] - state.v[1])
    u += g.hdv[0] * (s_shared - cfg.s_star) + g.hdv[1] * (v_shared - cfg.v_star)
    return float(np.clip(u, cfg.a_min, cfg.a_max))


def fuel_rate(v: float, a: float) -> float:
    """Instantaneous fuel consumption (mL/s) of a vehicle at speed v, acceleration a."""
    r = 0.333 + 0.00108 * v * v + 1.2 * a
    if r <= 0.0:
        return 0.444
    f = 0.444 + 0.090 * r * v
    if a > 0.0:
        f += 0.054 * a * a * v
    return float(f)


def distortion(x_true: np.ndarray, y_shared: np.ndarray, cfg: EnvConfig) -> float:
    """Weighted Euclidean distance between true and shared (speed, spacing)."""
    w1, w2 = cfg.distortion_weights
    dv = float(x_true[0]) - float(y_shared[0])
    ds = float(x_true[1]) - float(y_shared[1])
    return float(np.sqrt(w1 * dv * dv + w2 * ds * ds))


def leader_velocity(t: int, cfg: EnvConfig) -> float:
    """Leader speed at step index t under the configured profile."""
    if cfg.leader_profile is LeaderProfile.CONSTANT:
        return cfg.v_star
    if cfg.leader_profile is LeaderProfile.SINE:
        return cfg.v_star + cfg.leader_amplitude * float(
            np.sin(2.0 * np.pi * t * cfg.dt / cfg.leader_period)
        )
    start, steps = cfg.leader_pulse_start, cfg.leader_pulse_steps
    drop = cfg.leader_amplitude * cfg.dt
    if t <= start:
        return cfg.v_star
    if t <= start + steps:
        return cfg.v_star - drop * (t - start)
    if t <= start + 2 * steps:
        return cfg.v_star - drop * (2 * steps - (t - start))
    return cfg.v_star


def step(
    state: PlatoonState,
    theta_true: np.ndarray,
    shared_hdv: np.ndarray,
    cfg: EnvConfig,
    rng: np.random.Generator,
) -> tuple[PlatoonState, StepLog]:
    """One Euler step of the closed loop driven by the shared HDV data."""
    v0, v1, v2 = (float(x) for x in state.v)
    s1, s2 = (float(x) for x in state.s)
    u = cav_control(state, shared_hdv, cfg)
    a_model = fvd_acceleration(np.asarray(theta_true, dtype=float), s2, v2, v1, cfg)
    zeta_a = cfg.step_noise_std_a * rng.standard_normal()
    a_hdv = float(np.clip(a_model + zeta_a, cfg.a_min, cfg.a_max))
    fuel = fuel_rate(v2, a_model)

    v0_new = float(np.clip(leader_velocity(state.t + 1, cfg), 0.0, cfg.v_max))
    v1_new = float(np.clip(v1 + cfg.dt * u, 0.0, cfg.v_max))
    v2_new = float(np.clip(v2 + cfg.dt * a_hdv, 0.0, cfg.v_max))

    zeta_s = cfg.noise_std_s * rng.standard_normal(2) if cfg.noise_std_s > 0 else np.zeros(2)
    s1_new = s1 + 0.5 * cfg.dt * ((v0 + v0_new) - (v1 + v1_new)) + zeta_s[0]
    s2_new = s2 + 0.5 * cfg.dt * ((v1 + v1_new) - (v2 + v2_new)) + zeta_s[1]

    safety = s1_new < cfg.min_spacing or s2_new < cfg.min_spacing
    s1_new = max(s1_new, cfg.min_spacing)
    s2_new = max(s2_new, cfg.min_spacing)

    new_state = PlatoonState(s=np.array([s1_new, s2_new]), v=np.array([v0_new, v1_new, v2_new]), t=state.t + 1)
    if not (np.all(np.isfinite(new_state.s)) and np.all(np.isfinite(new_state.v))):
        raise RuntimeError(f"non-finite platoon state at step {state.t + 1}")
    log = StepLog(
        a_cav=u,
        a_hdv_model=float(a_model),
        a_hdv_applied=a_hdv,
        fuel=fuel,
        v1_before=v1,
        v1_after=v1_new,
        v0_before=v0,
        v0_after=v0_new,
        safety_event=bool(safety),
    )
    return new_state, log


def hdv_transition(cfg: EnvConfig):
    """Transition sampler for the HDV state (speed, spacing) given the CAV's
    velocity over the step, for use as particle-belief dynamics.

    The exogenous context is the pair (v1_before, v1_after) recorded in the
    step log; the noise model and clamps match :func:`step` exactly, so the
    particle proposal is the true transition kernel.
    """

    def dynamics(theta_values, states, w_t, rng):
        v1_before, v1_after = float(w_t[0]), float(w_t[1])
        v = states[:, 0]
        s = states[:, 1]
        a_model = fvd_acceleration(theta_values, s, v, v1_before, cfg)
        zeta = cfg.step_noise_std_a * rng.standard_normal(v.shape[0])
        a = np.clip(a_model + zeta, cfg.a_min, cfg.a_max)
        v_new = np.clip(v + cfg.dt * a, 0.0, cfg.v_max)
        s_new = s + 0.5 * cfg.dt * ((v1_before + v1_after) - (v + v_new))
        if cfg.noise_std_s > 0:
            s_new = s_new + cfg.noise_std_s * rng.standard_normal(s.shape[0])
        s_new = np.maximum(s_new, cfg.min_spacing)
        return np.column_stack([v_new, s_new])

    return dynamics
