"""Linear regression solvers used by the sparse identification pipeline.

All solvers consume a :class:`RegressionProblem` and produce a
:class:`SparseSolution`.  The LASSO objective is written in unnormalized form

    || target - design @ w ||_2^2 + lam * || w ||_1

(no 1/(2m) factor), so the all-zero solution appears at
``lam >= 2 * || design.T @ target ||_inf``.  For LASSO and STLS the design
columns are rescaled to unit Euclidean norm internally by default and the
coefficients un-scaled on output; the regularization/threshold parameter
therefore acts on normalized-column coefficients.  Pass ``normalize=False``
to operate on the raw columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg
from sklearn.model_selection import KFold


@dataclass(frozen=True)
class RegressionProblem:
    """Design matrix, single target column and optional column labels."""

    design: np.ndarray
    target: np.ndarray
    column_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        design = np.asarray(self.design, dtype=float)
        target = np.asarray(self.target, dtype=float)
        if design.ndim != 2 or design.shape[0] < 1 or design.shape[1] < 1:
            raise ValueError("design must be a non-empty 2-D matrix")
        if target.shape != (design.shape[0],):
            raise ValueError("target must be a vector with one entry per row")
        if not np.isfinite(design).all() or not np.isfinite(target).all():
            raise ValueError("design and target must be finite")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "target", target)
        if self.column_labels is not None:
            labels = tuple(self.column_labels)
            if len(labels) != design.shape[1]:
                raise ValueError("one label per design column required")
            object.__setattr__(self, "column_labels", labels)

    @property
    def shape(self):
        return self.design.shape


@dataclass(frozen=True)
class SparseSolution:
    """Coefficient vector with explicit support and bookkeeping."""

    xi: np.ndarray
    support: np.ndarray
    lam: float
    residual_norm: float
    solver_tag: str
    converged: bool = True
    rank_deficient: bool = False
    all_pruned: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def support_size(self) -> int:
        return len(self.support)


def _finish(problem, xi, lam, tag, support=None, **kwargs) -> SparseSolution:
    xi = np.asarray(xi, dtype=float)
    if support is None:
        support = np.flatnonzero(xi)
    residual = float(np.linalg.norm(problem.target - problem.design @ xi))
    return SparseSolution(xi, support, float(lam), residual, tag, **kwargs)


def _column_norms(design):
    norms = np.linalg.norm(design, axis=0)
    if np.any(norms == 0.0):
        raise ValueError("design contains an all-zero column")
    return norms


def solve_ols(problem: RegressionProblem) -> SparseSolution:
    """Ordinary least squares (minimum-norm solution if rank deficient)."""
    design, target = problem.design, problem.target
    rcond = 1e-10
    xi, _, rank, _ = scipy.linalg.lstsq(design, target, cond=rcond,
                                        lapack_driver="gelsd")
    # OLS support is all columns by definition, incidental zeros included.
    return _finish(problem, xi, 0.0, "ols", support=np.arange(design.shape[1]),
                   rank_deficient=rank < design.shape[1])


def soft_threshold(z, threshold):
    return np.sign(z) * np.maximum(np.abs(z) - threshold, 0.0)


def solve_lasso(problem: RegressionProblem, lam: float, normalize: bool = True,
                tol: float = 1e-10, max_sweeps: int = 100_000,
                track_objective: bool = False) -> SparseSolution:
    """L1-regularized least squares by cyclic coordinate descent.

    Each coordinate update is an exact one-dimensional minimization with
    soft-thresholding, so the objective is non-increasing within and across
    sweeps.  Convergence is declared when no coefficient moves by more than
    ``tol`` during a sweep.
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    design, target = problem.design, problem.target
    norms = _column_norms(design) if normalize else np.ones(design.shape[1])
    x = design / norms
    col_sq = np.einsum("ij,ij->j", x, x)

    w = np.zeros(design.shape[1])
    residual = target.copy()
    history = []
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(len(w)):
            old = w[j]
            if old != 0.0:
                residual += x[:, j] * old
            z = x[:, j] @ residual
            new = soft_threshold(z, lam / 2.0) / col_sq[j]
            if new != 0.0:
                residual -= x[:, j] * new
            w[j] = new
            max_delta = max(max_delta, abs(new - old))
        if track_objective:
            history.append(residual @ residual + lam * np.abs(w).sum())
        if sweeps % 100 == 0:
            residual = target - x @ w  # refresh against incremental drift
        if max_delta < tol:
            converged = True
            break

    diagnostics = {"sweeps": sweeps}
    if track_objective:
        diagnostics["objective_history"] = np.asarray(history)
    return _finish(problem, w / norms, lam, "lasso", converged=converged,
                   diagnostics=diagnostics)


def solve_stls(problem: RegressionProblem, threshold: float,
               normalize: bool = True) -> SparseSolution:
    """Sequential thresholded least squares.

    Starts from the full least-squares solution, then repeatedly zeroes
    coefficients below the threshold, removes the corresponding columns and
    re-solves on the survivors, until every remaining coefficient clears the
    threshold.  With normalization enabled the threshold applies to the
    unit-column coefficients.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    design = problem.design
    norms = _column_norms(design) if normalize else np.ones(design.shape[1])
    x = design / norms

    keep = np.arange(design.shape[1])
    iterations = 0
    all_pruned = False
    while True:
        iterations += 1
        w, _, _, _ = scipy.linalg.lstsq(x[:, keep], problem.target,
                                        cond=1e-10, lapack_driver="gelsd")
        small = np.abs(w) < threshold
        if not small.any():
            break
        keep = keep[~small]
        if len(keep) == 0:
            all_pruned = True
            w = np.zeros(0)
            break

    xi = np.zeros(design.shape[1])
    xi[keep] = w / norms[keep]
    return _finish(problem, xi, threshold, "stls", all_pruned=all_pruned,
                   diagnostics={"iterations": iterations})


@dataclass(frozen=True)
class LassoCVResult:
    best_lambda: float
    solution: SparseSolution
    lambdas: np.ndarray
    cv_mse: np.ndarray
    support_sizes: np.ndarray
    residuals: np.ndarray


def _parallel_map(fn, items, n_jobs):
    if n_jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def lasso_cv(problem: RegressionProblem, lambdas, k: int = 5, seed: int = 0,
             n_jobs: int = 1, normalize: bool = True) -> LassoCVResult:
    """Pick the LASSO penalty by k-fold cross validation.

    Folds are contiguous blocks of the row order after one seeded shuffle;
    the winning lambda minimizes the mean validation MSE and the returned
    solution is refit on all rows at that value.
    """
    lambdas = np.asarray(sorted(lambdas), dtype=float)
    if len(lambdas) == 0:
        raise ValueError("lambda grid must be non-empty")
    m = problem.shape[0]
    if k < 2:
        raise ValueError("need at least 2 folds")
    if m < k:
        raise ValueError("need at least one row per fold")

    splits = list(KFold(n_splits=k, shuffle=True, random_state=seed)
                  .split(problem.design))

    def fold_errors(lam):
        errs = np.empty(k)
        for i, (train, val) in enumerate(splits):
            sub = RegressionProblem(problem.design[train], problem.target[train])
            fit = solve_lasso(sub, lam, normalize=normalize)
            pred = problem.design[val] @ fit.xi
            errs[i] = np.mean((problem.target[val] - pred) ** 2)
        return errs

    per_lambda = _parallel_map(fold_errors, list(lambdas), n_jobs)
    cv_mse = np.array([errs.mean() for errs in per_lambda])

    full_fits = _parallel_map(lambda lam: solve_lasso(problem, lam,
                                                      normalize=normalize),
                              list(lambdas), n_jobs)
    best_idx = int(np.argmin(cv_mse))
    best = full_fits[best_idx]
    return LassoCVResult(
        best_lambda=float(lambdas[best_idx]),
        solution=best,
        lambdas=lambdas,
        cv_mse=cv_mse,
        support_sizes=np.array([f.support_size for f in full_fits]),
        residuals=np.array([f.residual_norm for f in full_fits]),
    )


@dataclass(frozen=True)
class ParetoPoint:
    lam: float
    support_size: int
    residual_norm: float


def pareto_sweep(problem: RegressionProblem, solver: str, lambdas,
                 n_jobs: int = 1, normalize: bool = True) -> list[ParetoPoint]:
    """Sparsity/error trade-off curve over a penalty grid (sorted by lambda)."""
    if solver not in ("lasso", "stls"):
        raise ValueError("solver must be 'lasso' or 'stls'")
    lambdas = np.asarray(sorted(lambdas), dtype=float)
    if len(lambdas) == 0:
        raise ValueError("lambda grid must be non-empty")

    def run(lam):
        if solver == "lasso":
            sol = solve_lasso(problem, lam, normalize=normalize)
        else:
            sol = solve_stls(problem, lam, normalize=normalize)
        return ParetoPoint(float(lam), sol.support_size, sol.residual_norm)

    return _parallel_map(run, list(lambdas), n_jobs)


def write_sweep_csv(path, points=None, cv: LassoCVResult | None = None) -> None:
    """Dump a pareto sweep or CV curve as `lambda,support_size,residual,cv_mse`."""
    rows = []
    if cv is not None:
        for i, lam in enumerate(cv.lambdas):
            rows.append((lam, cv.support_sizes[i], cv.residuals[i], cv.cv_mse[i]))
    elif points is not None:
        for p in points:
            rows.append((p.lam, p.support_size, p.residual_norm, np.nan))
    else:
        raise ValueError("provide either sweep points or a CV result")
    with open(path, "w") as fh:
        fh.write("lambda,support_size,residual,cv_mse\n")
        for lam, size, res, mse in rows:
            fh.write(f"{lam:.17g},{int(size)},{res:.17g},{mse:.17g}\n")
