"""Nonlinear-regression baseline: fit the Stribeck template to data.

A damped Gauss-Newton (Levenberg-Marquardt) loop with the analytic Jacobian
of the five-parameter curve. Serves as the classical counterpart to the
sparse library identification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import column_or_1d

from .friction import StribeckModel
from .sindy import EmptyDatasetError, IdentificationDataset, _check_sign_coverage

_A3_FLOOR = 1e-6


@dataclass(frozen=True)
class NlRegConfig:
    initial_guess: StribeckModel | None = None
    max_iterations: int = 200
    gradient_tolerance: float = 1e-10
    damping_init: float = 1e-3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.gradient_tolerance <= 0 or self.damping_init <= 0:
            raise ValueError("tolerances and damping must be positive")


@dataclass(frozen=True)
class FitDiagnostics:
    iterations: int
    gradient_norm: float
    rmse: float
    converged: bool
    clamped: bool
    objective_history: np.ndarray


def stribeck_curve(a, v):
    a1, a2, a3, a4, a5 = a
    v = np.asarray(v, dtype=float)
    return (a1 * v + a2 * np.tanh(a3 * v)
            + a4 * np.exp(-a5 * np.abs(v)) * np.tanh(3.0 * a3 * v))


def stribeck_jacobian(a, v) -> np.ndarray:
    """Partials of the Stribeck curve w.r.t. (a1..a5); rows follow ``v``."""
    a1, a2, a3, a4, a5 = np.asarray(a, dtype=float)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    absv = np.abs(v)
    decay = np.exp(-a5 * absv)
    t3 = np.tanh(3.0 * a3 * v)
    sech2 = 1.0 / np.cosh(a3 * v) ** 2
    sech2_3 = 1.0 / np.cosh(3.0 * a3 * v) ** 2
    return np.column_stack([
        v,
        np.tanh(a3 * v),
        a2 * v * sech2 + 3.0 * a4 * v * decay * sech2_3,
        decay * t3,
        -a4 * absv * decay * t3,
    ])


def initial_guess_from_data(v, tau) -> StribeckModel:
    """Data-driven seed: viscous slope from OLS, Coulomb level from low speeds."""
    v = np.asarray(v, dtype=float)
    tau = np.asarray(tau, dtype=float)
    denom = float(v @ v)
    a1 = float(v @ tau) / denom if denom > 0 else 0.0
    band = (np.abs(v) >= 0.1) & (np.abs(v) <= 0.3)
    if band.any():
        a2 = float(np.abs(tau[band]).mean())
    else:
        a2 = float(np.abs(tau).mean())
    return StribeckModel(a1, a2, 10.0, 0.0, 1.0)


def fit_stribeck(ds: IdentificationDataset,
                 cfg: NlRegConfig = NlRegConfig()):
    """Levenberg-Marquardt fit of the Stribeck template to one joint.

    The damping factor shrinks tenfold on accepted steps and grows tenfold
    on rejected ones, so the sum of squared residuals never increases across
    accepted iterations.  ``a3`` (and ``a5``) are clamped to stay in the
    model's admissible range; a clamp is reported in the diagnostics.
    Returns ``(model, diagnostics)``.
    """
    if len(ds) == 0:
        raise EmptyDatasetError("cannot fit a friction curve to an empty dataset")
    _check_sign_coverage(ds)
    v, tau = ds.velocity, ds.torque

    guess = cfg.initial_guess or initial_guess_from_data(v, tau)
    a = guess.as_array.copy()
    mu = cfg.damping_init
    clamped = False
    converged = False

    def cost(params):
        r = stribeck_curve(params, v) - tau
        return r, float(r @ r)

    residual, objective = cost(a)
    history = [objective]
    gradient_norm = np.inf
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        jac = stribeck_jacobian(a, v)
        gradient = jac.T @ residual
        gradient_norm = float(np.linalg.norm(gradient))
        if gradient_norm < cfg.gradient_tolerance:
            converged = True
            break
        jtj = jac.T @ jac
        scale = np.diag(np.maximum(np.diag(jtj), 1e-12))
        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(jtj + mu * scale, -gradient)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            candidate = a + step
            if candidate[2] <= 0.0:
                candidate[2] = _A3_FLOOR
                clamped = True
            if candidate[4] < 0.0:
                candidate[4] = 0.0
                clamped = True
            new_residual, new_objective = cost(candidate)
            if new_objective < objective:
                a, residual, objective = candidate, new_residual, new_objective
                mu = max(mu / 10.0, 1e-14)
                accepted = True
                break
            mu *= 10.0
        history.append(objective)
        if not accepted:
            break

    model = StribeckModel(*a)
    diagnostics = FitDiagnostics(
        iterations=iterations,
        gradient_norm=gradient_norm,
        rmse=float(np.sqrt(objective / len(v))),
        converged=converged,
        clamped=clamped,
        objective_history=np.asarray(history),
    )
    return model, diagnostics


class StribeckRegressor(BaseEstimator, RegressorMixin):
    """Scikit-learn style wrapper around the Stribeck template fit."""

    def __init__(self, initial_guess=None, max_iterations=200,
                 gradient_tolerance=1e-10, damping_init=1e-3):
        self.initial_guess = initial_guess
        self.max_iterations = max_iterations
        self.gradient_tolerance = gradient_tolerance
        self.damping_init = damping_init

    def fit(self, X, y):
        v = column_or_1d(np.asarray(X, dtype=float).squeeze())
        tau = column_or_1d(np.asarray(y, dtype=float))
        ds = IdentificationDataset(v, tau, joint=-1,
                                   provenance={"source": "estimator"})
        cfg = NlRegConfig(self.initial_guess, self.max_iterations,
                          self.gradient_tolerance, self.damping_init)
        self.model_, self.diagnostics_ = fit_stribeck(ds, cfg)
        self.coef_ = self.model_.as_array
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("StribeckRegressor is not fitted yet")
        v = column_or_1d(np.asarray(X, dtype=float).squeeze())
        return self.model_.torque(v)
