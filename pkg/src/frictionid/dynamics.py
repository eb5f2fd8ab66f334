"""Rigid-body dynamics of a planar 2-link manipulator under gravity.

Joint angles are measured from the hanging rest pose: ``y1`` is the angle of
link 1 against the downward vertical, ``y2`` the angle of link 2 relative to
link 1.  With this convention the gravity torque vanishes whenever both links
lie on the gravity axis and is restoring around the rest pose.

The equation of motion is written as

    M(y) y'' + k(y, y') = q(y, y') + B u,      q = q_grav - tau(y')

with mass matrix ``M``, Coriolis/centrifugal vector ``k``, gravity torque
``q_grav``, velocity-dependent joint friction ``tau`` and gear matrix ``B``
scaling the motor torques ``u`` to the joint side.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class DivergenceError(RuntimeError):
    """Raised when a forward simulation leaves the sane state range."""

    def __init__(self, step, t, state):
        self.step = step
        self.t = t
        self.state = state
        super().__init__(
            f"simulation diverged at step {step} (t = {t:.6g} s): "
            f"state = {np.asarray(state)}"
        )


def _as_pair(value, name):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"{name} must have exactly 2 entries, got shape {arr.shape}")
    return tuple(arr)


@dataclass(frozen=True)
class ArmParameters:
    """Physical parameters of the 2-link arm.

    Lengths/distances in m, masses in kg, inertias (about the COM) in kg m^2,
    torque limits on the joint side in N m, velocity limits in rad/s.
    """

    link_mass: tuple[float, float]
    link_length: tuple[float, float]
    link_com_distance: tuple[float, float]
    link_inertia: tuple[float, float]
    gear_ratio: tuple[float, float]
    motor_constant: float
    gravity: float
    torque_limit: tuple[float, float]
    velocity_limit: tuple[float, float]

    def __post_init__(self):
        for name in ("link_mass", "link_length", "link_com_distance",
                     "link_inertia", "gear_ratio", "torque_limit",
                     "velocity_limit"):
            pair = _as_pair(getattr(self, name), name)
            object.__setattr__(self, name, pair)
            if name != "velocity_limit" and name != "torque_limit":
                if any(v <= 0 for v in pair):
                    raise ValueError(f"{name} entries must be strictly positive")
        if any(v <= 0 for v in self.torque_limit):
            raise ValueError("torque_limit entries must be strictly positive")
        if any(v <= 0 for v in self.velocity_limit):
            raise ValueError("velocity_limit entries must be strictly positive")
        if self.motor_constant <= 0:
            raise ValueError("motor_constant must be strictly positive")
        if not np.isfinite(self.gravity):
            raise ValueError("gravity must be finite")

    @property
    def gear_matrix(self) -> np.ndarray:
        return np.diag(self.gear_ratio)


@dataclass(frozen=True)
class JointState:
    """Joint positions, velocities and (optionally) accelerations."""

    y: np.ndarray
    ydot: np.ndarray
    yddot: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        ydot = np.asarray(self.ydot, dtype=float)
        if y.shape != (2,) or ydot.shape != (2,):
            raise ValueError("JointState entries must be length-2 vectors")
        if not (np.isfinite(y).all() and np.isfinite(ydot).all()):
            raise ValueError("JointState entries must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ydot", ydot)
        if self.yddot is not None:
            yddot = np.asarray(self.yddot, dtype=float)
            if yddot.shape != (2,) or not np.isfinite(yddot).all():
                raise ValueError("yddot must be a finite length-2 vector")
            object.__setattr__(self, "yddot", yddot)


@dataclass(frozen=True)
class Plant:
    """Arm parameters plus an optional per-joint friction model.

    ``friction`` is a pair of objects exposing ``torque(v)`` and ``slope(v)``
    (see :mod:`frictionid.friction`); ``None`` means a frictionless plant.
    The same type serves as synthetic ground truth and as the nominal model
    used for feed-forward, residual extraction and MPC linearization.
    """

    params: ArmParameters
    friction: tuple | None = None

    def __post_init__(self):
        if self.friction is not None and len(self.friction) != 2:
            raise ValueError("friction must provide one model per joint")

    def friction_torque(self, ydot) -> np.ndarray:
        ydot = np.asarray(ydot, dtype=float)
        if self.friction is None:
            return np.zeros_like(ydot)
        return np.array([float(self.friction[i].torque(ydot[i])) for i in range(2)])

    def friction_slope(self, ydot) -> np.ndarray:
        ydot = np.asarray(ydot, dtype=float)
        if self.friction is None:
            return np.zeros_like(ydot)
        return np.array([float(self.friction[i].slope(ydot[i])) for i in range(2)])

    def without_friction(self) -> "Plant":
        return replace(self, friction=None)


def mass_matrix(params: ArmParameters, y) -> np.ndarray:
    """Symmetric positive definite mass matrix at configuration ``y``."""
    m1, m2 = params.link_mass
    l1 = params.link_length[0]
    c1, c2 = params.link_com_distance
    i1, i2 = params.link_inertia
    cos2 = np.cos(y[1])
    m11 = i1 + i2 + m1 * c1**2 + m2 * (l1**2 + c2**2 + 2.0 * l1 * c2 * cos2)
    m12 = i2 + m2 * (c2**2 + l1 * c2 * cos2)
    m22 = i2 + m2 * c2**2
    return np.array([[m11, m12], [m12, m22]])


def mass_matrix_partials(params: ArmParameters, y) -> np.ndarray:
    """dM/dy as a (2, 2, 2) array; only the y2 slice is nonzero."""
    m2 = params.link_mass[1]
    l1 = params.link_length[0]
    c2 = params.link_com_distance[1]
    s2 = np.sin(y[1])
    d = np.zeros((2, 2, 2))
    d[1] = -m2 * l1 * c2 * s2 * np.array([[2.0, 1.0], [1.0, 0.0]])
    return d


def coriolis_vector(params: ArmParameters, y, ydot) -> np.ndarray:
    """Generalized Coriolis/centrifugal force vector k(y, y')."""
    m2 = params.link_mass[1]
    l1 = params.link_length[0]
    c2 = params.link_com_distance[1]
    h = m2 * l1 * c2 * np.sin(y[1])
    return np.array([
        -h * (2.0 * ydot[0] * ydot[1] + ydot[1] ** 2),
        h * ydot[0] ** 2,
    ])


def gravity_forces(params: ArmParameters, y) -> np.ndarray:
    """Generalized gravity force q_grav(y); restoring around the rest pose."""
    m1, m2 = params.link_mass
    l1 = params.link_length[0]
    c1, c2 = params.link_com_distance
    g = params.gravity
    s1 = np.sin(y[0])
    s12 = np.sin(y[0] + y[1])
    return np.array([
        -g * ((m1 * c1 + m2 * l1) * s1 + m2 * c2 * s12),
        -g * m2 * c2 * s12,
    ])


def potential_energy(params: ArmParameters, y) -> float:
    """Gravitational potential, zero reference at the joint-1 axis height."""
    m1, m2 = params.link_mass
    l1 = params.link_length[0]
    c1, c2 = params.link_com_distance
    g = params.gravity
    h1 = -c1 * np.cos(y[0])
    h2 = -l1 * np.cos(y[0]) - c2 * np.cos(y[0] + y[1])
    return float(g * (m1 * h1 + m2 * h2))


def total_energy(params: ArmParameters, y, ydot) -> float:
    ydot = np.asarray(ydot, dtype=float)
    return float(0.5 * ydot @ mass_matrix(params, y) @ ydot
                 + potential_energy(params, y))


def _solve_mass(params, y, rhs):
    m = mass_matrix(params, y)
    try:
        return np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:  # valid ArmParameters keep M PD
        raise ValueError(f"mass matrix numerically singular at y = {y}") from exc


def forward_dynamics(plant: Plant, y, ydot, u) -> np.ndarray:
    """Joint accelerations for motor torque ``u``."""
    y = np.asarray(y, dtype=float)
    ydot = np.asarray(ydot, dtype=float)
    u = np.asarray(u, dtype=float)
    rhs = (gravity_forces(plant.params, y)
           - plant.friction_torque(ydot)
           + plant.params.gear_matrix @ u
           - coriolis_vector(plant.params, y, ydot))
    return _solve_mass(plant.params, y, rhs)


def inverse_dynamics(plant: Plant, y, ydot, yddot) -> np.ndarray:
    """Motor torque reproducing ``yddot`` at the given state."""
    y = np.asarray(y, dtype=float)
    ydot = np.asarray(ydot, dtype=float)
    yddot = np.asarray(yddot, dtype=float)
    joint_torque = (mass_matrix(plant.params, y) @ yddot
                    + coriolis_vector(plant.params, y, ydot)
                    + plant.friction_torque(ydot)
                    - gravity_forces(plant.params, y))
    return joint_torque / np.asarray(plant.params.gear_ratio)


def acceleration_jacobians(plant: Plant, y, ydot, u):
    """Analytic partials of the joint acceleration.

    Returns ``(d_y, d_ydot, d_u)``, each 2x2, with columns indexed by the
    differentiation variable.
    """
    y = np.asarray(y, dtype=float)
    ydot = np.asarray(ydot, dtype=float)
    u = np.asarray(u, dtype=float)
    params = plant.params
    m1, m2 = params.link_mass
    l1 = params.link_length[0]
    c1, c2 = params.link_com_distance
    g = params.gravity

    yddot = forward_dynamics(plant, y, ydot, u)
    dm = mass_matrix_partials(params, y)

    c1_ = np.cos(y[0])
    c12 = np.cos(y[0] + y[1])
    dq = np.array([
        [-g * ((m1 * c1 + m2 * l1) * c1_ + m2 * c2 * c12), -g * m2 * c2 * c12],
        [-g * m2 * c2 * c12, -g * m2 * c2 * c12],
    ])

    h = m2 * l1 * c2 * np.sin(y[1])
    hp = m2 * l1 * c2 * np.cos(y[1])
    dk_dy = np.array([
        [0.0, -hp * (2.0 * ydot[0] * ydot[1] + ydot[1] ** 2)],
        [0.0, hp * ydot[0] ** 2],
    ])
    dk_dyd = np.array([
        [-2.0 * h * ydot[1], -2.0 * h * (ydot[0] + ydot[1])],
        [2.0 * h * ydot[0], 0.0],
    ])

    d_y = np.column_stack([
        _solve_mass(params, y, dq[:, j] - dk_dy[:, j] - dm[j] @ yddot)
        for j in range(2)
    ])
    dtau = plant.friction_slope(ydot)
    d_ydot = np.column_stack([
        _solve_mass(params, y, -dtau[j] * np.eye(2)[:, j] - dk_dyd[:, j])
        for j in range(2)
    ])
    d_u = _solve_mass(params, y, params.gear_matrix)
    return d_y, d_ydot, d_u


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled joint-space time series with inputs."""

    t: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    yddot: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        for name in ("y", "ydot", "yddot", "u"):
            if getattr(self, name).shape != (n, 2):
                raise ValueError(f"{name} must have shape ({n}, 2)")

    def __len__(self):
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def every(self, step: int) -> "TimeSeries":
        """Downsample by keeping every ``step``-th row."""
        return TimeSeries(self.t[::step], self.y[::step], self.ydot[::step],
                          self.yddot[::step], self.u[::step])


def zero_order_hold(t_grid, u_grid):
    """Piecewise-constant control signal over a sample grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    u_grid = np.asarray(u_grid, dtype=float)

    def u_of_t(t):
        idx = min(np.searchsorted(t_grid, t + 1e-12) , len(t_grid)) - 1
        return u_grid[max(idx, 0)]

    return u_of_t


def linear_interpolant(t_grid, u_grid):
    """Piecewise-linear control signal over a sample grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    u_grid = np.asarray(u_grid, dtype=float)

    def u_of_t(t):
        return np.array([np.interp(t, t_grid, u_grid[:, j]) for j in range(2)])

    return u_of_t


_DIVERGENCE_LIMIT = 1e6


def simulate(plant: Plant, u_of_t, y0: JointState, dt: float,
             n_steps: int) -> TimeSeries:
    """Fixed-step RK4 roll-out of the forward dynamics.

    ``u_of_t`` maps time to the length-2 motor torque.  The result has
    ``n_steps + 1`` rows sampled every ``dt``; accelerations are evaluated
    from the forward dynamics at the sample instants.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    def f(t, x):
        return np.concatenate([
            x[2:], forward_dynamics(plant, x[:2], x[2:], u_of_t(t))
        ])

    x = np.concatenate([y0.y, y0.ydot])
    t = 0.0
    n = n_steps + 1
    ts = np.arange(n) * dt
    ys = np.empty((n, 2))
    yds = np.empty((n, 2))
    ydds = np.empty((n, 2))
    us = np.empty((n, 2))
    for k in range(n):
        u_k = np.asarray(u_of_t(t), dtype=float)
        ys[k] = x[:2]
        yds[k] = x[2:]
        ydds[k] = forward_dynamics(plant, x[:2], x[2:], u_k)
        us[k] = u_k
        if k == n_steps:
            break
        k1 = f(t, x)
        k2 = f(t + dt / 2.0, x + dt / 2.0 * k1)
        k3 = f(t + dt / 2.0, x + dt / 2.0 * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        if np.abs(x).max() > _DIVERGENCE_LIMIT or not np.isfinite(x).all():
            raise DivergenceError(k + 1, t, x)
    return TimeSeries(ts, ys, yds, ydds, us)
