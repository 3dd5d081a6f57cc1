"""Controlled stochastic benchmark systems (Lorenz 63, torque-limited pendulum).

All operations are pure functions of (spec, state, control, rng) and accept
batched state/control arrays with matching leading dimensions. Noise draws
come from an explicit numpy Generator so trajectories are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LORENZ_SIGMA = 10.0
LORENZ_RHO = 28.0
LORENZ_BETA = 8.0 / 3.0

PENDULUM_MASS = 1.0
PENDULUM_LENGTH = 1.0
PENDULUM_GRAVITY = 10.0

FIXED_POINT_TOL = 1e-9


class NonFiniteStateError(RuntimeError):
    """A step produced NaN/Inf entries; carries the offending state."""

    def __init__(self, state: np.ndarray):
        super().__init__(f"non-finite state after step: {state!r}")
        self.state = state


def wrap_angle(theta):
    """Map angles into (-pi, pi]."""
    wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


@dataclass(frozen=True)
class SystemSpec:
    """Static description of one controlled stochastic system.

    `x_e` must be a fixed point of the uncontrolled drift; `sigma_e` spreads
    the initial state around it and `sigma_process` is the per-step additive
    noise standard deviation applied after integration. `angle_dims` marks
    state components that live on the circle (stored wrapped to (-pi, pi]);
    increments along them are taken modulo 2*pi.
    """

    name: str
    dim_state: int
    dim_control: int
    dt: float
    x_e: np.ndarray
    sigma_e: float
    sigma_process: float
    control_lo: np.ndarray
    control_hi: np.ndarray
    angle_dims: tuple = ()

    def __post_init__(self):
        if self.name not in ("lorenz", "pendulum"):
            raise ValueError(f"unknown system {self.name!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sigma_e < 0 or self.sigma_process < 0:
            raise ValueError("noise scales must be nonnegative")
        object.__setattr__(self, "x_e", np.asarray(self.x_e, dtype=float))
        object.__setattr__(self, "control_lo", np.asarray(self.control_lo, dtype=float))
        object.__setattr__(self, "control_hi", np.asarray(self.control_hi, dtype=float))
        residual = np.linalg.norm(drift(self, self.x_e, np.zeros(self.dim_control)))
        if residual >= FIXED_POINT_TOL:
            raise ValueError(f"x_e is not a fixed point (|drift| = {residual:g})")


def lorenz_spec(
    u_max: float = 10.0,
    sigma_e: float = 1.0,
    sigma_process: float | None = None,
    dt: float = 0.01,
) -> SystemSpec:
    """Lorenz 63 with additive forcing on every component, u in [-u_max, u_max]^3."""
    x_e = np.array([math.sqrt(72.0), math.sqrt(72.0), 27.0])
    if sigma_process is None:
        sigma_process = 0.01 * float(np.linalg.norm(x_e))
    return SystemSpec(
        name="lorenz",
        dim_state=3,
        dim_control=3,
        dt=dt,
        x_e=x_e,
        sigma_e=sigma_e,
        sigma_process=sigma_process,
        control_lo=-u_max * np.ones(3),
        control_hi=u_max * np.ones(3),
    )


def pendulum_spec(
    u_max: float = 2.0,
    sigma_e: float = 0.05,
    sigma_process: float | None = None,
    dt: float = 0.05,
) -> SystemSpec:
    """Rigid pendulum with torque input; angle measured from upright, wrapped.

    The reference state is the hanging equilibrium (pi, 0).
    """
    x_e = np.array([math.pi, 0.0])
    if sigma_process is None:
        sigma_process = 0.01 * float(np.linalg.norm(x_e))
    return SystemSpec(
        name="pendulum",
        dim_state=2,
        dim_control=1,
        dt=dt,
        x_e=x_e,
        sigma_e=sigma_e,
        sigma_process=sigma_process,
        control_lo=np.array([-u_max]),
        control_hi=np.array([u_max]),
        angle_dims=(0,),
    )


def _check_dims(spec: SystemSpec, x: np.ndarray, u: np.ndarray):
    if x.shape[-1] != spec.dim_state:
        raise ValueError(f"state width {x.shape[-1]} != {spec.dim_state}")
    if u.shape[-1] != spec.dim_control:
        raise ValueError(f"control width {u.shape[-1]} != {spec.dim_control}")


def drift(spec: SystemSpec, x, u) -> np.ndarray:
    """Continuous-time derivative of the state; broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_dims(spec, x, u)
    if spec.name == "lorenz":
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack(
            [
                LORENZ_SIGMA * (x2 - x1) + u[..., 0],
                x1 * (LORENZ_RHO - x3) - x2 + u[..., 1],
                x1 * x2 - LORENZ_BETA * x3 + u[..., 2],
            ],
            axis=-1,
        )
    theta, omega = x[..., 0], x[..., 1]
    accel = (3.0 * PENDULUM_GRAVITY / (2.0 * PENDULUM_LENGTH)) * np.sin(theta)
    accel = accel + (3.0 / (PENDULUM_MASS * PENDULUM_LENGTH**2)) * u[..., 0]
    return np.stack([omega, accel], axis=-1)


def clip_control(spec: SystemSpec, u) -> np.ndarray:
    """Saturate controls to the spec's box bounds."""
    return np.clip(np.asarray(u, dtype=float), spec.control_lo, spec.control_hi)


def step(spec: SystemSpec, x, u, rng: np.random.Generator) -> np.ndarray:
    """One discrete transition: RK4 over dt plus additive Gaussian noise.

    Controls are clipped to bounds; the pendulum angle is re-wrapped. Raises
    NonFiniteStateError if the result is not finite.
    """
    x = np.asarray(x, dtype=float)
    u = clip_control(spec, u)
    _check_dims(spec, x, u)
    h = spec.dt
    with np.errstate(invalid="ignore", over="ignore"):
        k1 = drift(spec, x, u)
        k2 = drift(spec, x + 0.5 * h * k1, u)
        k3 = drift(spec, x + 0.5 * h * k2, u)
        k4 = drift(spec, x + h * k3, u)
        x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    # noise is always drawn so stream consumption does not depend on sigma
    x_next = x_next + spec.sigma_process * rng.standard_normal(x_next.shape)
    if spec.name == "pendulum":
        x_next = x_next.copy()
        x_next[..., 0] = wrap_angle(x_next[..., 0])
    if not np.all(np.isfinite(x_next)):
        raise NonFiniteStateError(x_next)
    return x_next


def rollout_held(spec: SystemSpec, x, u, tau: int, rng: np.random.Generator) -> np.ndarray:
    """Hold `u` constant for `tau` steps; returns (tau+1, d) states including x."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    x = np.asarray(x, dtype=float)
    states = np.empty((tau + 1,) + x.shape, dtype=float)
    states[0] = x
    for i in range(tau):
        states[i + 1] = step(spec, states[i], u, rng)
    return states


def sample_initial(spec: SystemSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw X0 = x_e + sigma_e * z with z standard normal; batched when size given."""
    shape = (spec.dim_state,) if size is None else (size, spec.dim_state)
    x = spec.x_e + spec.sigma_e * rng.standard_normal(shape)
    if spec.name == "pendulum":
        x[..., 0] = wrap_angle(x[..., 0])
    return x


def cost(spec: SystemSpec, x, u) -> np.ndarray:
    """Instantaneous nonnegative cost; broadcasts over leading axes.

    Lorenz: squared norm of the state. Pendulum: wrapped angle from upright
    squared + 0.1 * angular velocity squared + 0.001 * torque squared.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_dims(spec, x, u)
    if spec.name == "lorenz":
        return np.sum(x * x, axis=-1)
    ang = wrap_angle(x[..., 0])
    return ang**2 + 0.1 * x[..., 1] ** 2 + 0.001 * u[..., 0] ** 2


def trajectory_cost(spec: SystemSpec, states: np.ndarray, controls: np.ndarray):
    """Total cost of a rollout: per-step costs plus the terminal state at zero control.

    `states` has one more row than `controls`. Accepts batches shaped
    (..., T+1, d) and (..., T, du); reduces over the time axis.
    """
    states = np.asarray(states, dtype=float)
    controls = np.asarray(controls, dtype=float)
    running = cost(spec, states[..., :-1, :], controls).sum(axis=-1)
    zero_u = np.zeros(controls.shape[:-2] + (spec.dim_control,))
    return running + cost(spec, states[..., -1, :], zero_u)


@dataclass(frozen=True)
class TransitionTuple:
    """One recorded (state, control, next state) observation.

    `tau` is the hold time used to produce it and `epoch` the underlying time
    index of `x`.
    """

    x: np.ndarray
    u: np.ndarray
    x_next: np.ndarray
    tau: int = 1
    epoch: int = 0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.epoch < 0:
            raise ValueError("epoch must be >= 0")
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "x_next", np.asarray(self.x_next, dtype=float))
