"""Excitation and reference trajectories for the 2-link arm.

The basic building block is a sine with linearly varying angular frequency,
multiplied by a quintic smoothstep envelope that blends from rest to full
amplitude and back.  The envelope keeps position, velocity and acceleration
continuous everywhere and exactly zero at both ends, so every generated
reference starts and ends in a static pose.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Plant, TimeSeries, inverse_dynamics


class TrajectoryLimitError(ValueError):
    """Generated trajectory exceeds a plant limit."""

    def __init__(self, kind: str, peak: float, limit: float):
        self.kind = kind
        self.peak = peak
        self.limit = limit
        super().__init__(
            f"trajectory rejected: peak |{kind}| = {peak:.6g} exceeds limit {limit:.6g}")


@dataclass(frozen=True)
class SineTrajectorySpec:
    """Chirped-sine excitation of one joint.

    The instantaneous angular frequency ramps linearly from ``omega_start``
    to ``omega_end`` over the full duration; ``ramp_duration`` is the length
    of the rest-to-full-amplitude blend at each end.
    """

    amplitude: float
    omega_start: float
    omega_end: float
    duration: float
    ramp_duration: float
    sample_dt: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.duration <= 0 or self.sample_dt <= 0:
            raise ValueError("duration and sample_dt must be positive")
        if self.ramp_duration < 0:
            raise ValueError("ramp_duration must be non-negative")
        if 2.0 * self.ramp_duration >= self.duration:
            raise ValueError("ramps must leave room for the sine body")


def _smoothstep(x):
    """Quintic 0 -> 1 blend with zero slope and curvature at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 + x * (6.0 * x - 15.0)), \
        30.0 * x**2 * (x - 1.0) ** 2, \
        60.0 * x * (x - 1.0) * (2.0 * x - 1.0)


def envelope(spec: SineTrajectorySpec, t):
    """Envelope value and its first two time derivatives at times ``t``."""
    t = np.asarray(t, dtype=float)
    w = np.ones_like(t)
    wd = np.zeros_like(t)
    wdd = np.zeros_like(t)
    tr = spec.ramp_duration
    if tr == 0.0:
        return w, wd, wdd
    rising = t < tr
    falling = t > spec.duration - tr
    s, sd, sdd = _smoothstep(t[rising] / tr)
    w[rising], wd[rising], wdd[rising] = s, sd / tr, sdd / tr**2
    s, sd, sdd = _smoothstep((spec.duration - t[falling]) / tr)
    w[falling], wd[falling], wdd[falling] = s, -sd / tr, sdd / tr**2
    return w, wd, wdd


def carrier(spec: SineTrajectorySpec, t):
    """Chirped sine and its first two time derivatives at times ``t``."""
    t = np.asarray(t, dtype=float)
    rate = (spec.omega_end - spec.omega_start) / spec.duration
    omega = spec.omega_start + rate * t
    phase = omega * t
    phase_d = omega + rate * t
    phase_dd = 2.0 * rate
    s = spec.amplitude * np.sin(phase)
    sd = spec.amplitude * phase_d * np.cos(phase)
    sdd = spec.amplitude * (phase_dd * np.cos(phase) - phase_d**2 * np.sin(phase))
    return s, sd, sdd


@dataclass(frozen=True)
class JointTrajectory:
    """Sampled single-joint motion with analytic derivatives."""

    t: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    yddot: np.ndarray


def generate_sine(spec: SineTrajectorySpec,
                  velocity_limit: float | None = None) -> JointTrajectory:
    """Sample the enveloped chirped sine on its own sample grid.

    Raises :class:`TrajectoryLimitError` when a velocity limit is given and
    the sampled peak speed exceeds it.
    """
    n = int(round(spec.duration / spec.sample_dt))
    t = np.arange(n + 1) * spec.sample_dt
    w, wd, wdd = envelope(spec, t)
    s, sd, sdd = carrier(spec, t)
    y = w * s
    ydot = wd * s + w * sd
    yddot = wdd * s + 2.0 * wd * sd + w * sdd
    if velocity_limit is not None:
        peak = float(np.abs(ydot).max())
        if peak > velocity_limit:
            raise TrajectoryLimitError("velocity", peak, velocity_limit)
    return JointTrajectory(t, y, ydot, yddot)


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Two-joint reference with optional feed-forward torques."""

    t: np.ndarray
    y_des: np.ndarray
    ydot_des: np.ndarray
    yddot_des: np.ndarray
    u_ff: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.t)
        for name in ("y_des", "ydot_des", "yddot_des"):
            if getattr(self, name).shape != (n, 2):
                raise ValueError(f"{name} must have shape ({n}, 2)")
        if self.u_ff is not None and self.u_ff.shape != (n, 2):
            raise ValueError(f"u_ff must have shape ({n}, 2)")

    def __len__(self):
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def as_timeseries(self) -> TimeSeries:
        """Reference in the common time-series layout (u = feed-forward)."""
        u = self.u_ff if self.u_ff is not None else np.zeros((len(self), 2))
        return TimeSeries(self.t, self.y_des, self.ydot_des, self.yddot_des, u)


def _stack_reference(t, joints) -> ReferenceTrajectory:
    return ReferenceTrajectory(
        t,
        np.column_stack([j[0] for j in joints]),
        np.column_stack([j[1] for j in joints]),
        np.column_stack([j[2] for j in joints]),
    )


def single_joint_reference(spec: SineTrajectorySpec, moving_joint: int = 0,
                           base_pose=(0.0, 0.0),
                           velocity_limit: float | None = None) -> ReferenceTrajectory:
    """Excite one joint with the sine, hold the other at its base angle."""
    traj = generate_sine(spec, velocity_limit)
    zeros = np.zeros_like(traj.t)
    moving = (base_pose[moving_joint] + traj.y, traj.ydot, traj.yddot)
    still = (np.full_like(traj.t, base_pose[1 - moving_joint]), zeros, zeros)
    joints = [moving, still] if moving_joint == 0 else [still, moving]
    return _stack_reference(traj.t, joints)


def gravity_compensated_pair(spec: SineTrajectorySpec, base_pose=(0.0, 0.0),
                             velocity_limit: float | None = None) -> ReferenceTrajectory:
    """Counter-rotating excitation keeping the distal link's absolute angle fixed.

    Joint 1 follows the sine, joint 2 its negation, so y1 + y2 stays at the
    base value and the gravity torque seen by joint 2 is constant along the
    whole motion.
    """
    traj = generate_sine(spec, velocity_limit)
    return _stack_reference(traj.t, [
        (base_pose[0] + traj.y, traj.ydot, traj.yddot),
        (base_pose[1] - traj.y, -traj.ydot, -traj.yddot),
    ])


def attach_feedforward(reference: ReferenceTrajectory, model: Plant,
                       check_torque_limit: bool = True) -> ReferenceTrajectory:
    """Fill in feed-forward motor torques from the model's inverse dynamics."""
    n = len(reference)
    u_ff = np.empty((n, 2))
    for k in range(n):
        u_ff[k] = inverse_dynamics(model, reference.y_des[k],
                                   reference.ydot_des[k], reference.yddot_des[k])
    if check_torque_limit:
        joint_torque = np.abs(u_ff) * np.asarray(model.params.gear_ratio)
        peak = float(joint_torque.max())
        limit = float(min(model.params.torque_limit))
        if peak > limit:
            raise TrajectoryLimitError("joint torque", peak, limit)
    return replace(reference, u_ff=u_ff)
