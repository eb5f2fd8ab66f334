"""Sparse identification of joint friction from measurement data.

The rigid-body terms of the arm are treated as prior knowledge: subtracting
them from the applied generalized forces leaves a per-joint residual torque

    tau_j = q_grav_j + (B u)_j - (M(y) y'')_j - k_j(y, y')

that, under the modeling assumption, depends on the joint velocity only.
Each joint's residual is then regressed onto a candidate-function library of
the velocity with a sparsity-promoting solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import column_or_1d

from .dynamics import (Plant, TimeSeries, coriolis_vector, gravity_forces,
                       mass_matrix)
from .friction import (FunctionLibrary, LibraryModel, default_friction_library)
from .regression import (RegressionProblem, lasso_cv, solve_lasso, solve_stls)


class EmptyDatasetError(ValueError):
    """Preprocessing removed every sample."""


@dataclass(frozen=True)
class DataMatrices:
    """Stacked state, state-derivative and input samples."""

    x: np.ndarray
    xdot: np.ndarray
    u: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        m = len(self.timestamps)
        for name in ("x", "xdot", "u"):
            arr = getattr(self, name)
            if arr.shape[0] != m:
                raise ValueError(f"{name} must have {m} rows")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite")
        if self.x.shape != self.xdot.shape:
            raise ValueError("x and xdot must have matching shapes")

    @classmethod
    def from_timeseries(cls, ts: TimeSeries) -> "DataMatrices":
        x = np.hstack([ts.y, ts.ydot])
        xdot = np.hstack([ts.ydot, ts.yddot])
        return cls(x, xdot, ts.u, ts.t)


@dataclass(frozen=True)
class IdentificationDataset:
    """Per-joint velocity/residual-torque samples plus their provenance."""

    velocity: np.ndarray
    torque: np.ndarray
    joint: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.velocity, dtype=float)
        tau = np.asarray(self.torque, dtype=float)
        if v.shape != tau.shape or v.ndim != 1:
            raise ValueError("velocity and torque must be equal-length vectors")
        if not (np.isfinite(v).all() and np.isfinite(tau).all()):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "velocity", v)
        object.__setattr__(self, "torque", tau)

    def __len__(self):
        return len(self.velocity)

    def rows(self, index) -> "IdentificationDataset":
        velocity = self.velocity[index]
        provenance = dict(self.provenance)
        provenance["row_selections"] = list(
            provenance.get("row_selections", ())) + [
                {"kind": "explicit", "retained": int(len(velocity))}]
        return replace(self, velocity=velocity, torque=self.torque[index],
                       provenance=provenance)


def residual_friction_torque(model: Plant, data: TimeSeries,
                             provenance: dict | None = None):
    """Residual torque left over after the friction-free model terms.

    ``model`` supplies the rigid-body prior (its friction entry is ignored);
    ``data`` must carry complete kinematic channels, either simulation truth
    or derivatives recovered from measurements.  Returns one dataset per
    joint.
    """
    params = model.params
    m = len(data)
    tau = np.empty((m, 2))
    for k in range(m):
        tau[k] = (gravity_forces(params, data.y[k])
                  + params.gear_matrix @ data.u[k]
                  - mass_matrix(params, data.y[k]) @ data.yddot[k]
                  - coriolis_vector(params, data.y[k], data.ydot[k]))
    base = dict(provenance or {})
    return tuple(
        IdentificationDataset(data.ydot[:, j].copy(), tau[:, j], j,
                              {**base, "joint": j, "samples": m})
        for j in range(2)
    )


def preprocess_small_angle(ds: IdentificationDataset, angle,
                           threshold: float) -> IdentificationDataset:
    """Keep samples where the gravity-relevant angle is close to neutral."""
    angle = np.asarray(angle, dtype=float)
    if angle.shape != ds.velocity.shape:
        raise ValueError("angle channel must align with the dataset rows")
    mask = np.abs(angle) < threshold
    if not mask.any():
        raise EmptyDatasetError(
            f"no samples with |angle| < {threshold:g}; dataset would be empty")
    provenance = dict(ds.provenance)
    selections = list(provenance.get("row_selections", []))
    selections.append({
        "kind": "small_angle",
        "threshold": float(threshold),
        "retained_fraction": float(mask.mean()),
    })
    provenance["row_selections"] = selections
    return replace(ds, velocity=ds.velocity[mask], torque=ds.torque[mask],
                   provenance=provenance)


def trim_edges(ds: IdentificationDataset, n: int) -> IdentificationDataset:
    """Drop ``n`` samples at each end (derivative boundary artifacts)."""
    if n == 0:
        return ds
    if 2 * n >= len(ds):
        raise EmptyDatasetError(f"trimming {n} samples per end empties the dataset")
    out = ds.rows(slice(n, len(ds) - n))
    out.provenance["row_selections"][-1] = {"kind": "edge_trim", "per_end": int(n)}
    return out


def _check_sign_coverage(ds: IdentificationDataset) -> bool:
    one_signed = ds.velocity.min() >= 0.0 or ds.velocity.max() <= 0.0
    if one_signed:
        warnings.warn(
            f"joint {ds.joint}: velocities cover only one sign; odd/even "
            "friction terms are not separately identifiable", UserWarning,
            stacklevel=3)
    return one_signed


def identify_friction(ds: IdentificationDataset,
                      library: FunctionLibrary | None = None,
                      method: str = "stls",
                      threshold: float = 5.0,
                      lam: float | None = None,
                      lambdas=None,
                      cv_folds: int = 5,
                      seed: int = 0,
                      normalize: bool = True):
    """Fit a sparse library model to one joint's residual torque.

    ``method`` selects the solver: ``"stls"`` (hard threshold, default),
    ``"lasso"`` (fixed penalty ``lam``) or ``"lasso_cv"`` (penalty picked on
    a grid by cross validation).  Returns ``(model, diagnostics)``.
    """
    if len(ds) == 0:
        raise EmptyDatasetError("cannot identify friction from an empty dataset")
    library = library or default_friction_library()
    one_signed = _check_sign_coverage(ds)

    problem = RegressionProblem(library.evaluate(ds.velocity), ds.torque,
                                library.labels)
    if method == "stls":
        solution = solve_stls(problem, threshold, normalize=normalize)
    elif method == "lasso":
        if lam is None:
            raise ValueError("method 'lasso' needs an explicit lam")
        solution = solve_lasso(problem, lam, normalize=normalize)
    elif method == "lasso_cv":
        if lambdas is None:
            lambdas = np.logspace(-4, 2, 25)
        cv = lasso_cv(problem, lambdas, k=cv_folds, seed=seed,
                      normalize=normalize)
        solution = cv.solution
    else:
        raise ValueError(f"unknown identification method: {method!r}")

    model = LibraryModel(solution.xi, library)
    rmse = solution.residual_norm / np.sqrt(len(ds))
    diagnostics = {
        "method": method,
        "lambda": solution.lam,
        "support": [library.labels[i] for i in solution.support],
        "support_size": solution.support_size,
        "residual_norm": solution.residual_norm,
        "rmse": float(rmse),
        "one_signed_velocity": one_signed,
        "solution": solution,
    }
    if method == "lasso_cv":
        diagnostics["cv"] = cv
    return model, diagnostics


class SindyRegressor(BaseEstimator, RegressorMixin):
    """Scikit-learn style front end for sparse friction identification.

    ``fit`` expects velocities as ``X`` (shape ``(m,)`` or ``(m, 1)``) and
    residual torques as ``y``; the fitted model is exposed both as sklearn
    attributes (``coef_``) and as a :class:`~frictionid.friction.LibraryModel`
    ready for serialization and control use.
    """

    def __init__(self, library=None, method="stls", threshold=5.0, lam=None,
                 lambdas=None, cv_folds=5, seed=0, normalize=True):
        self.library = library
        self.method = method
        self.threshold = threshold
        self.lam = lam
        self.lambdas = lambdas
        self.cv_folds = cv_folds
        self.seed = seed
        self.normalize = normalize

    def _velocities(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        return column_or_1d(X)

    def fit(self, X, y):
        v = self._velocities(X)
        tau = column_or_1d(np.asarray(y, dtype=float))
        ds = IdentificationDataset(v, tau, joint=-1,
                                   provenance={"source": "estimator"})
        model, diagnostics = identify_friction(
            ds, library=self.library, method=self.method,
            threshold=self.threshold, lam=self.lam, lambdas=self.lambdas,
            cv_folds=self.cv_folds, seed=self.seed, normalize=self.normalize)
        self.model_ = model
        self.diagnostics_ = diagnostics
        self.coef_ = model.coefficients
        self.support_ = model.support
        self.feature_names_ = list(model.library.labels)
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("SindyRegressor is not fitted yet")
        return self.model_.torque(self._velocities(X))
