"""Structured text configuration for the pipeline commands.

One INI file with sections ``[arm]``, ``[friction]``, ``[trajectory]``,
``[simulate]``, ``[encoder]``, ``[tvdiff]``, ``[solver]`` and ``[mpc]``.
Every schema violation is reported with its section and field name.  The
full schema with defaults is what :func:`default_config_text` prints.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .dynamics import ArmParameters
from .friction import StribeckModel, LibraryModel, default_friction_library
from .mpc import MpcConfig
from .signals import EncoderSpec
from .trajectory import SineTrajectorySpec


class ConfigError(ValueError):
    """Configuration file violates the documented schema."""

    def __init__(self, section, option, message):
        self.section = section
        self.option = option
        super().__init__(f"[{section}] {option}: {message}")


def _floats(raw, section, option, count=None):
    try:
        values = tuple(float(part) for part in raw.split(","))
    except ValueError:
        raise ConfigError(section, option, f"cannot parse {raw!r} as numbers")
    if count is not None and len(values) != count:
        raise ConfigError(section, option,
                          f"expected {count} comma-separated values, got {len(values)}")
    return values


class _Section:
    def __init__(self, parser, name):
        self.name = name
        if name not in parser:
            raise ConfigError(name, "-", "section missing")
        self.raw = parser[name]

    def get(self, option, default=None):
        if option in self.raw:
            return self.raw[option].strip()
        if default is None:
            raise ConfigError(self.name, option, "required option missing")
        return default

    def number(self, option, default=None):
        raw = self.get(option, default)
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(self.name, option, f"cannot parse {raw!r} as a number")

    def integer(self, option, default=None):
        raw = self.get(option, default)
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(self.name, option, f"cannot parse {raw!r} as an integer")

    def flag(self, option, default):
        raw = self.get(option, default).lower()
        if raw in ("on", "true", "yes", "1"):
            return True
        if raw in ("off", "false", "no", "0"):
            return False
        raise ConfigError(self.name, option, f"expected on/off, got {raw!r}")

    def pair(self, option, default=None):
        return _floats(self.get(option, default), self.name, option, count=2)

    def choice(self, option, allowed, default=None):
        raw = self.get(option, default)
        if raw not in allowed:
            raise ConfigError(self.name, option,
                              f"must be one of {sorted(allowed)}, got {raw!r}")
        return raw


def _parse_friction_entry(section, option, raw):
    kind, _, body = raw.partition(":")
    kind = kind.strip().lower()
    if kind == "stribeck":
        params = _floats(body, section, option, count=5)
        try:
            return StribeckModel(*params)
        except ValueError as exc:
            raise ConfigError(section, option, str(exc))
    if kind == "library":
        library = default_friction_library()
        coef = np.zeros(len(library))
        for item in body.split(","):
            label, _, value = item.partition("=")
            label = label.strip()
            if label not in library.labels:
                raise ConfigError(section, option,
                                  f"unknown library term {label!r}")
            try:
                coef[library.labels.index(label)] = float(value)
            except ValueError:
                raise ConfigError(section, option,
                                  f"cannot parse weight for {label!r}")
        return LibraryModel(coef, library)
    raise ConfigError(section, option,
                      f"expected 'stribeck: ...' or 'library: ...', got {raw!r}")


@dataclass(frozen=True)
class TrajectoryOptions:
    spec: SineTrajectorySpec
    pattern: str            # "pair" or "single"
    moving_joint: int       # 0-based, only used for "single"
    base_pose: tuple[float, float]


@dataclass(frozen=True)
class SimulateOptions:
    dt_internal: float
    apply_encoder: bool
    torque_interpolation: str  # "linear" or "zoh"


@dataclass(frozen=True)
class TvdiffOptions:
    enabled: bool
    alpha_velocity: float
    alpha_acceleration: float
    iterations: int
    epsilon: float
    edge_trim: int


@dataclass(frozen=True)
class SolverOptions:
    method: str
    stls_threshold: float
    lasso_lambda: float
    lasso_grid: np.ndarray
    cv_folds: int
    normalize_columns: bool
    preprocess_angle_threshold: float | None


@dataclass(frozen=True)
class RunConfig:
    arm: ArmParameters
    truth_friction: tuple
    trajectory: TrajectoryOptions
    simulate: SimulateOptions
    encoder: EncoderSpec
    tvdiff: TvdiffOptions
    solver: SolverOptions
    mpc: MpcConfig
    mpc_encoder_in_loop: bool = False


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise ConfigError("-", "-", f"cannot read config file {path}")

    arm_sec = _Section(parser, "arm")
    try:
        arm = ArmParameters(
            link_mass=arm_sec.pair("link_mass"),
            link_length=arm_sec.pair("link_length"),
            link_com_distance=arm_sec.pair("link_com_distance"),
            link_inertia=arm_sec.pair("link_inertia"),
            gear_ratio=arm_sec.pair("gear_ratio"),
            motor_constant=arm_sec.number("motor_constant"),
            gravity=arm_sec.number("gravity"),
            torque_limit=arm_sec.pair("torque_limit"),
            velocity_limit=arm_sec.pair("velocity_limit"),
        )
    except ValueError as exc:
        raise ConfigError("arm", "-", str(exc))

    fric_sec = _Section(parser, "friction")
    truth = tuple(
        _parse_friction_entry("friction", opt, fric_sec.get(opt))
        for opt in ("joint1", "joint2")
    )

    traj_sec = _Section(parser, "trajectory")
    try:
        spec = SineTrajectorySpec(
            amplitude=traj_sec.number("amplitude"),
            omega_start=traj_sec.number("omega_start"),
            omega_end=traj_sec.number("omega_end"),
            duration=traj_sec.number("duration"),
            ramp_duration=traj_sec.number("ramp_duration"),
            sample_dt=traj_sec.number("sample_dt"),
        )
    except ValueError as exc:
        raise ConfigError("trajectory", "-", str(exc))
    trajectory = TrajectoryOptions(
        spec=spec,
        pattern=traj_sec.choice("pattern", {"pair", "single"}, "pair"),
        moving_joint=traj_sec.integer("moving_joint", "1") - 1,
        base_pose=traj_sec.pair("base_pose", "0.0, 0.0"),
    )
    if trajectory.moving_joint not in (0, 1):
        raise ConfigError("trajectory", "moving_joint", "must be 1 or 2")

    sim_sec = _Section(parser, "simulate")
    simulate = SimulateOptions(
        dt_internal=sim_sec.number("dt_internal", "0.001"),
        apply_encoder=sim_sec.flag("encoder", "on"),
        torque_interpolation=sim_sec.choice("torque_interpolation",
                                            {"linear", "zoh"}, "linear"),
    )
    if simulate.dt_internal <= 0:
        raise ConfigError("simulate", "dt_internal", "must be positive")

    enc_sec = _Section(parser, "encoder")
    try:
        encoder = EncoderSpec(
            resolution=enc_sec.number("resolution"),
            velocity_word_resolution=enc_sec.number("velocity_word_resolution"),
            noise_std=enc_sec.number("noise_std"),
        )
    except ValueError as exc:
        raise ConfigError("encoder", "-", str(exc))

    tv_sec = _Section(parser, "tvdiff")
    tvdiff = TvdiffOptions(
        enabled=tv_sec.flag("enabled", "on"),
        alpha_velocity=tv_sec.number("alpha_velocity", "1e-5"),
        alpha_acceleration=tv_sec.number("alpha_acceleration", "1e-4"),
        iterations=tv_sec.integer("iterations", "40"),
        epsilon=tv_sec.number("epsilon", "1e-6"),
        edge_trim=tv_sec.integer("edge_trim", "5"),
    )
    if tvdiff.alpha_velocity <= 0 or tvdiff.alpha_acceleration <= 0:
        raise ConfigError("tvdiff", "alpha_velocity", "alphas must be positive")
    if tvdiff.edge_trim < 0:
        raise ConfigError("tvdiff", "edge_trim", "must be non-negative")

    sol_sec = _Section(parser, "solver")
    threshold_raw = sol_sec.get("preprocess_angle_threshold", "none")
    preprocess = None if threshold_raw.lower() == "none" else float(threshold_raw)
    grid_min = sol_sec.number("lasso_grid_min", "1e-4")
    grid_max = sol_sec.number("lasso_grid_max", "1e2")
    grid_size = sol_sec.integer("lasso_grid_size", "25")
    if grid_min <= 0 or grid_max <= grid_min or grid_size < 1:
        raise ConfigError("solver", "lasso_grid_min", "invalid lambda grid")
    solver = SolverOptions(
        method=sol_sec.choice("method", {"stls", "lasso", "nlreg"}, "stls"),
        stls_threshold=sol_sec.number("stls_threshold", "5.0"),
        lasso_lambda=sol_sec.number("lasso_lambda", "0.05"),
        lasso_grid=np.logspace(np.log10(grid_min), np.log10(grid_max), grid_size),
        cv_folds=sol_sec.integer("cv_folds", "5"),
        normalize_columns=sol_sec.flag("normalize_columns", "on"),
        preprocess_angle_threshold=preprocess,
    )
    if solver.stls_threshold <= 0:
        raise ConfigError("solver", "stls_threshold", "must be positive")

    mpc_sec = _Section(parser, "mpc")
    terminal_raw = mpc_sec.get("terminal_weight", "same")
    try:
        mpc = MpcConfig(
            horizon=mpc_sec.integer("horizon", "15"),
            state_weight=np.diag(_floats(mpc_sec.get("state_weight",
                                                     "100, 100, 1, 1"),
                                         "mpc", "state_weight", 4)),
            input_weight=np.diag(mpc_sec.pair("input_weight", "0.01, 0.01")),
            terminal_weight=(None if terminal_raw == "same" else
                             np.diag(_floats(terminal_raw, "mpc",
                                             "terminal_weight", 4))),
            sample_dt=mpc_sec.number("sample_dt", str(spec.sample_dt)),
        )
    except ValueError as exc:
        raise ConfigError("mpc", "-", str(exc))

    return RunConfig(arm, truth, trajectory, simulate, encoder, tvdiff,
                     solver, mpc, mpc_encoder_in_loop=mpc_sec.flag(
                         "encoder_in_loop", "off"))


def default_config_text() -> str:
    """The documented schema, populated with the canonical desk-scale setup."""
    return """\
; frictionid pipeline configuration (INI). Angles are measured from the
; hanging rest pose; joints are numbered 1 and 2 from the base.

[arm]
link_mass = 4.0, 2.5                ; kg
link_length = 0.35, 0.30            ; m
link_com_distance = 0.175, 0.15     ; m, joint axis to center of mass
link_inertia = 0.05, 0.03           ; kg m^2 about the COM
gear_ratio = 161.0, 161.0
motor_constant = 0.123              ; N m / A
gravity = 9.81                      ; m/s^2
torque_limit = 44.8, 44.8           ; N m, joint side
velocity_limit = 2.6179938779914944, 2.6179938779914944  ; rad/s (25 rpm)

[friction]
; ground truth used by `simulate`: stribeck: a1..a5, or
; library: term=weight, ... with terms from
; 1, v, sgn(v), tanh(5v), tanh(10v), tanh(20v), tanh(100v)
joint1 = stribeck: 1.10, 1.80, 10.0, 0.30, 2.0
joint2 = stribeck: 0.70, 1.30, 18.0, 0.20, 3.0

[trajectory]
pattern = pair                      ; pair (counter-rotating) or single
moving_joint = 1                    ; excited joint for pattern = single
amplitude = 0.5                     ; rad
omega_start = 1.0                   ; rad/s
omega_end = 2.2                     ; rad/s, linear ramp over the duration
duration = 12.0                     ; s
ramp_duration = 1.5                 ; s, rest-to-full-amplitude blend
sample_dt = 0.02                    ; s, measurement grid
base_pose = 0.0, 0.0                ; rad

[simulate]
dt_internal = 0.001                 ; s, integrator step
encoder = on                        ; write encoder-corrupted measurements
torque_interpolation = linear       ; linear or zoh between torque samples

[encoder]
resolution = 1e-4                   ; rad
velocity_word_resolution = 1e-2     ; rad/s
noise_std = 1e-5                    ; rad

[tvdiff]
enabled = on                        ; off: trust the recorded derivatives
alpha_velocity = 1e-5               ; see scripts/tvdiff_alpha_sweep.py
alpha_acceleration = 1e-4
iterations = 40
epsilon = 1e-6
edge_trim = 5                       ; samples dropped per end after differentiating

[solver]
method = stls                       ; stls, lasso or nlreg
stls_threshold = 5.0                 ; acts on unit-norm-column coefficients
lasso_lambda = 0.05
lasso_grid_min = 1e-4               ; lambda grid for lasso cross validation
lasso_grid_max = 1e2
lasso_grid_size = 25
cv_folds = 5
normalize_columns = on
preprocess_angle_threshold = none   ; e.g. 0.1 to keep only |angle| < 0.1 rad

[mpc]
horizon = 15
state_weight = 100, 100, 1, 1       ; diagonal of Q
input_weight = 0.01, 0.01           ; diagonal of R
terminal_weight = same              ; 'same' or a 4-value diagonal
sample_dt = 0.02
encoder_in_loop = off
"""


def write_default_config(path) -> None:
    with open(path, "w") as fh:
        fh.write(default_config_text())
