"""Two-step tracking control: feed-forward plus linear time-varying MPC.

The nominal model is linearized about the reference trajectory and its
feed-forward input; the MPC acts on the deviation state
``e = (y - y_des, y' - y'_des)`` and computes a torque correction on top of
the feed-forward.  Each control step condenses the finite-horizon quadratic
cost into a box-constrained QP over the input corrections and applies the
first move of the solution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dynamics import (JointState, Plant, acceleration_jacobians,
                       simulate)
from .friction import LibraryModel
from .signals import EncoderSpec, _round_to
from .trajectory import ReferenceTrajectory


class QPSolverError(RuntimeError):
    """Active-set iteration guard tripped."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


@dataclass(frozen=True)
class LtvModel:
    """Discrete-time linearization along a reference, one (A, B) per step."""

    a: np.ndarray
    b: np.ndarray
    dt: float
    sgn_at_zero_steps: tuple = ()

    def __post_init__(self):
        if self.a.shape[1:] != (4, 4) or self.b.shape[1:] != (4, 2):
            raise ValueError("expected stacked 4x4 state and 4x2 input matrices")
        if self.a.shape[0] != self.b.shape[0]:
            raise ValueError("A and B stacks must have equal length")
        if not (np.isfinite(self.a).all() and np.isfinite(self.b).all()):
            raise ValueError("linearization produced non-finite matrices")

    def __len__(self):
        return self.a.shape[0]

    def extended(self, extra: int) -> "LtvModel":
        """Pad by repeating the final step (for horizons past the end)."""
        a = np.concatenate([self.a, np.repeat(self.a[-1:], extra, axis=0)])
        b = np.concatenate([self.b, np.repeat(self.b[-1:], extra, axis=0)])
        return LtvModel(a, b, self.dt, self.sgn_at_zero_steps)


def _check_psd(name, mat, shape, strict=False):
    mat = np.asarray(mat, dtype=float)
    if mat.shape != shape:
        raise ValueError(f"{name} must have shape {shape}")
    eigs = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    if strict and eigs.min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    if not strict and eigs.min() < -1e-12:
        raise ValueError(f"{name} must be positive semidefinite")
    return 0.5 * (mat + mat.T)


@dataclass(frozen=True)
class MpcConfig:
    """Horizon, weights and rate of the deviation-state MPC."""

    horizon: int = 15
    state_weight: np.ndarray = field(
        default_factory=lambda: np.diag([100.0, 100.0, 1.0, 1.0]))
    input_weight: np.ndarray = field(
        default_factory=lambda: np.diag([0.01, 0.01]))
    terminal_weight: np.ndarray | None = None
    sample_dt: float = 0.02

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.sample_dt <= 0:
            raise ValueError("sample_dt must be positive")
        object.__setattr__(self, "state_weight",
                           _check_psd("state_weight", self.state_weight, (4, 4)))
        object.__setattr__(self, "input_weight",
                           _check_psd("input_weight", self.input_weight, (2, 2),
                                      strict=True))
        terminal = (self.state_weight if self.terminal_weight is None
                    else self.terminal_weight)
        object.__setattr__(self, "terminal_weight",
                           _check_psd("terminal_weight", terminal, (4, 4)))


@dataclass(frozen=True)
class QPProblem:
    """min 1/2 x'Hx + g'x subject to lb <= x <= ub, with H positive definite."""

    h: np.ndarray
    g: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        n = len(self.g)
        if self.h.shape != (n, n):
            raise ValueError("H must be square and match g")
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bounds must match the decision dimension")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bounds must not exceed upper bounds")
        sym = 0.5 * (self.h + self.h.T)
        try:
            np.linalg.cholesky(sym)
        except np.linalg.LinAlgError as exc:
            raise ValueError("H must be positive definite") from exc
        object.__setattr__(self, "h", sym)


def _sgn_at_zero_steps(plant: Plant, reference: ReferenceTrajectory):
    models = plant.friction or ()
    flagged = []
    for j, model in enumerate(models):
        if isinstance(model, LibraryModel):
            try:
                sgn_idx = model.library.labels.index("sgn(v)")
            except ValueError:
                continue
            if model.coefficients[sgn_idx] != 0.0:
                hits = np.flatnonzero(reference.ydot_des[:, j] == 0.0)
                flagged.extend((int(k), j) for k in hits)
    return tuple(sorted(flagged))


def linearize_along(reference: ReferenceTrajectory, model: Plant) -> LtvModel:
    """Exact discretization of the nominal Jacobians along the reference.

    At steps where a joint reference velocity is exactly zero and the model
    carries an active sign term, the friction slope falls back to the
    subgradient value 0; those steps are listed in ``sgn_at_zero_steps``.
    """
    if reference.u_ff is None:
        raise ValueError("reference must carry feed-forward torques")
    n = len(reference)
    dt = reference.dt
    a = np.empty((n, 4, 4))
    b = np.empty((n, 4, 2))
    stacked = np.zeros((6, 6))
    for k in range(n):
        d_y, d_ydot, d_u = acceleration_jacobians(
            model, reference.y_des[k], reference.ydot_des[k], reference.u_ff[k])
        stacked[:2, 2:4] = np.eye(2)
        stacked[2:4, :2] = d_y
        stacked[2:4, 2:4] = d_ydot
        stacked[2:4, 4:6] = d_u
        exp = scipy.linalg.expm(stacked * dt)
        a[k] = exp[:4, :4]
        b[k] = exp[:4, 4:6]
    return LtvModel(a, b, dt, _sgn_at_zero_steps(model, reference))


def _prediction_matrices(model: LtvModel, horizon: int, start: int):
    nx, nu = 4, 2
    gamma = np.empty((horizon * nx, nx))
    phi = np.zeros((horizon * nx, horizon * nu))
    running = np.eye(nx)
    for i in range(horizon):
        a_i = model.a[start + i]
        b_i = model.b[start + i]
        if i > 0:
            phi[i * nx:(i + 1) * nx, :i * nu] = a_i @ phi[(i - 1) * nx:i * nx, :i * nu]
        phi[i * nx:(i + 1) * nx, i * nu:(i + 1) * nu] = b_i
        running = a_i @ running
        gamma[i * nx:(i + 1) * nx] = running
    return gamma, phi


def _stage_weights(cfg: MpcConfig):
    blocks = [cfg.state_weight] * (cfg.horizon - 1)
    blocks.append(cfg.state_weight + cfg.terminal_weight)
    return scipy.linalg.block_diag(*blocks)


def build_condensed_qp(model: LtvModel, cfg: MpcConfig, x0,
                       start: int = 0, input_bounds=None) -> QPProblem:
    """Eliminate the predicted states, leaving the input corrections.

    The cost is ``sum_{i=1..N} x_i' Q x_i + x_N' P x_N + sum u_i' R u_i``
    with the predicted states substituted via the stacked model.
    ``input_bounds`` is an optional ``(lb, ub)`` pair of ``(N, 2)`` arrays.
    """
    n = cfg.horizon
    if start + n > len(model):
        raise ValueError("model does not cover the requested horizon window")
    x0 = np.asarray(x0, dtype=float)
    gamma, phi = _prediction_matrices(model, n, start)
    qbar = _stage_weights(cfg)
    rbar = scipy.linalg.block_diag(*([cfg.input_weight] * n))
    h = phi.T @ qbar @ phi + rbar
    g = phi.T @ qbar @ (gamma @ x0)
    if input_bounds is None:
        lb = np.full(2 * n, -np.inf)
        ub = np.full(2 * n, np.inf)
    else:
        lb = np.asarray(input_bounds[0], dtype=float).reshape(2 * n)
        ub = np.asarray(input_bounds[1], dtype=float).reshape(2 * n)
    return QPProblem(0.5 * (h + h.T), g, lb, ub)


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    active_lower: np.ndarray
    active_upper: np.ndarray
    iterations: int
    kkt_residual: float

    @property
    def n_active(self) -> int:
        return int(self.active_lower.sum() + self.active_upper.sum())


def kkt_residual(qp: QPProblem, x, active_lower, active_upper) -> float:
    """Worst violation of stationarity, feasibility and multiplier signs."""
    grad = qp.h @ x + qp.g
    free = ~(active_lower | active_upper)
    residual = 0.0
    if free.any():
        residual = max(residual, float(np.abs(grad[free]).max()))
    # At bounds the gradient itself is the (signed) multiplier.
    if active_lower.any():
        residual = max(residual, float(np.maximum(-grad[active_lower], 0.0).max()))
        residual = max(residual, float(np.abs(x[active_lower] - qp.lb[active_lower]).max()))
    if active_upper.any():
        residual = max(residual, float(np.maximum(grad[active_upper], 0.0).max()))
        residual = max(residual, float(np.abs(x[active_upper] - qp.ub[active_upper]).max()))
    violation = np.maximum(qp.lb - x, 0.0) + np.maximum(x - qp.ub, 0.0)
    return max(residual, float(violation.max()))


def solve_qp(qp: QPProblem, tolerance: float = 1e-10,
             max_iterations: int | None = None) -> QpSolution:
    """Primal active-set method for the box-constrained strictly convex QP.

    Starts from the clipped origin; each iteration solves the equality
    subproblem on the free variables, takes the longest feasible step and
    updates the working set by the blocking bound or, at a subproblem
    optimum, releases the bound with the most negative multiplier.  The
    iteration budget (default ten times the dimension) guards against
    cycling on degenerate problems.
    """
    n = len(qp.g)
    x = np.clip(np.zeros(n), qp.lb, qp.ub)
    at_lower = x <= qp.lb
    at_upper = x >= qp.ub
    if max_iterations is None:
        max_iterations = max(10 * n, 20)

    for iteration in range(1, max_iterations + 1):
        free = ~(at_lower | at_upper)
        p = np.zeros(n)
        if free.any():
            rhs = -(qp.g[free] + qp.h[np.ix_(free, ~free)] @ x[~free])
            target = np.linalg.solve(qp.h[np.ix_(free, free)], rhs)
            p[free] = target - x[free]

        if np.abs(p).max(initial=0.0) <= 1e-13:
            grad = qp.h @ x + qp.g
            lower_mult = np.where(at_lower, grad, np.inf)
            upper_mult = np.where(at_upper, -grad, np.inf)
            worst = min(lower_mult.min(initial=np.inf),
                        upper_mult.min(initial=np.inf))
            if worst >= -tolerance:
                return QpSolution(x, at_lower.copy(), at_upper.copy(),
                                  iteration, kkt_residual(qp, x, at_lower, at_upper))
            if lower_mult.min(initial=np.inf) <= upper_mult.min(initial=np.inf):
                at_lower[int(np.argmin(lower_mult))] = False
            else:
                at_upper[int(np.argmin(upper_mult))] = False
            continue

        step = 1.0
        blocker = -1
        blocker_upper = False
        for i in np.flatnonzero(free):
            if p[i] > 0 and x[i] + p[i] > qp.ub[i]:
                candidate = (qp.ub[i] - x[i]) / p[i]
                if candidate < step:
                    step, blocker, blocker_upper = candidate, i, True
            elif p[i] < 0 and x[i] + p[i] < qp.lb[i]:
                candidate = (qp.lb[i] - x[i]) / p[i]
                if candidate < step:
                    step, blocker, blocker_upper = candidate, i, False
        x = x + step * p
        if blocker >= 0:
            if blocker_upper:
                x[blocker] = qp.ub[blocker]
                at_upper[blocker] = True
            else:
                x[blocker] = qp.lb[blocker]
                at_lower[blocker] = True

    raise QPSolverError(
        f"active-set solver exceeded {max_iterations} iterations", iterate=x)


@dataclass(frozen=True)
class ClosedLoopLog:
    """Per-step record of a closed-loop tracking run."""

    t: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    y_des: np.ndarray
    ydot_des: np.ndarray
    u_ff: np.ndarray
    u_mpc: np.ndarray
    qp_failures: tuple = ()
    n_active_bound_steps: int = 0
    plans: list | None = None

    @property
    def tracking_error(self) -> np.ndarray:
        return self.y - self.y_des

    def summary(self) -> dict:
        err = self.tracking_error
        return {
            "mean_abs_umpc": float(np.abs(self.u_mpc).mean()),
            "mean_abs_umpc_per_joint": np.abs(self.u_mpc).mean(axis=0).tolist(),
            "max_abs_umpc": float(np.abs(self.u_mpc).max()),
            "tracking_rmse": float(np.sqrt((err ** 2).mean())),
            "tracking_rmse_per_joint": np.sqrt((err ** 2).mean(axis=0)).tolist(),
            "qp_failures": len(self.qp_failures),
            "active_bound_steps": self.n_active_bound_steps,
        }


def run_closed_loop(true_plant: Plant, nominal_model: Plant,
                    reference: ReferenceTrajectory, cfg: MpcConfig,
                    encoder: EncoderSpec | None = None, seed: int = 0,
                    dt_internal: float = 1e-3,
                    record_plans: bool = False) -> ClosedLoopLog:
    """Track the reference on the true plant with feed-forward + LTV-MPC.

    Per step: measure the state (exact, or encoder-quantized when ``encoder``
    is given), build the condensed QP for the deviation state, apply the
    first input correction on top of the feed-forward and integrate the true
    plant over one sample period.  A failed QP solve holds the previous
    correction and is recorded; a diverging plant aborts the run.
    """
    if reference.u_ff is None:
        raise ValueError("reference must carry feed-forward torques")
    if abs(reference.dt - cfg.sample_dt) > 1e-12:
        raise ValueError("reference grid and MPC sample_dt disagree")

    n_steps = len(reference) - 1
    horizon = cfg.horizon
    model = linearize_along(reference, nominal_model).extended(horizon)
    u_ff_pad = np.vstack([reference.u_ff,
                          np.repeat(reference.u_ff[-1:], horizon, axis=0)])
    motor_limit = (np.asarray(true_plant.params.torque_limit)
                   / np.asarray(true_plant.params.gear_ratio))

    # The Hessian and the gradient map e0 -> g are state independent, so the
    # whole horizon window can be condensed once per step up front.
    steps = []
    for k in range(n_steps):
        gamma, phi = _prediction_matrices(model, horizon, k)
        qbar = _stage_weights(cfg)
        rbar = scipy.linalg.block_diag(*([cfg.input_weight] * horizon))
        h = phi.T @ qbar @ phi + rbar
        g_map = phi.T @ qbar @ gamma
        window = u_ff_pad[k:k + horizon]
        lb = (-motor_limit - window).reshape(-1)
        ub = (motor_limit - window).reshape(-1)
        steps.append((0.5 * (h + h.T), g_map, lb, ub))

    rng = np.random.default_rng(seed)
    substeps = max(int(round(cfg.sample_dt / dt_internal)), 1)

    y = reference.y_des[0].copy()
    ydot = reference.ydot_des[0].copy()
    u_mpc_prev = np.zeros(2)
    qp_failures = []
    active_steps = 0
    plans = [] if record_plans else None

    logs = {name: np.empty((n_steps, 2)) for name in
            ("y", "ydot", "u_ff", "u_mpc")}
    for k in range(n_steps):
        if encoder is not None:
            y_meas = _round_to(y + rng.normal(0.0, encoder.noise_std, 2),
                               encoder.resolution)
            ydot_meas = _round_to(ydot, encoder.velocity_word_resolution)
        else:
            y_meas, ydot_meas = y, ydot
        e = np.concatenate([y_meas - reference.y_des[k],
                            ydot_meas - reference.ydot_des[k]])
        h, g_map, lb, ub = steps[k]
        qp = QPProblem(h, g_map @ e, lb, ub)
        try:
            sol = solve_qp(qp)
            u_mpc = sol.x[:2]
            if sol.n_active:
                active_steps += 1
            if record_plans:
                plans.append(sol.x.copy())
        except QPSolverError:
            qp_failures.append(k)
            u_mpc = u_mpc_prev
            if record_plans:
                plans.append(None)
        u_mpc_prev = u_mpc
        # Hold the interval-midpoint feed-forward: the right piecewise-constant
        # stand-in for the continuous torque over [t_k, t_{k+1}).
        u_ff_hold = 0.5 * (reference.u_ff[k] + u_ff_pad[k + 1])
        u_applied = u_ff_hold + u_mpc

        logs["y"][k] = y
        logs["ydot"][k] = ydot
        logs["u_ff"][k] = reference.u_ff[k]
        logs["u_mpc"][k] = u_mpc

        rollout = simulate(true_plant, lambda _t: u_applied,
                           JointState(y, ydot), dt_internal, substeps)
        y = rollout.y[-1]
        ydot = rollout.ydot[-1]

    return ClosedLoopLog(
        t=reference.t[:n_steps],
        y=logs["y"], ydot=logs["ydot"],
        y_des=reference.y_des[:n_steps], ydot_des=reference.ydot_des[:n_steps],
        u_ff=logs["u_ff"], u_mpc=logs["u_mpc"],
        qp_failures=tuple(qp_failures),
        n_active_bound_steps=active_steps,
        plans=plans,
    )
