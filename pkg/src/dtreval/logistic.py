"""Weighted logistic regression by iteratively reweighted least squares.

Shared numerical kernel for the propensity fit, the stabilized-weight
numerator model, and the pooled hazard models.  Deterministic: Newton steps
with step-halving on penalized log-likelihood decrease, convergence on the
max-norm of the (penalized) score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SeparationError, SingularDesignError

# Linear predictors are clipped only for probability evaluation; coefficient
# growth beyond this bound with a stalling score is treated as separation.
_ETA_CLIP = 35.0
_COEF_BOUND = 60.0


def expit(eta: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(eta, -_ETA_CLIP, _ETA_CLIP)))


@dataclass(frozen=True)
class LogisticFit:
    coefficients: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    ridge: float
    column_names: tuple[str, ...] = ()
    n_obs: int = 0

    def linear_predictor(self, design: np.ndarray) -> np.ndarray:
        return np.asarray(design, dtype=float) @ self.coefficients

    def predict_proba(self, design: np.ndarray) -> np.ndarray:
        return expit(self.linear_predictor(design))

    def summary(self) -> dict:
        return {
            "coefficients": dict(
                zip(self.column_names or [f"b{i}" for i in range(len(self.coefficients))],
                    [float(c) for c in self.coefficients])
            ),
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "ridge": self.ridge,
            "n_obs": self.n_obs,
        }


def weighted_log_likelihood(
    design: np.ndarray, response: np.ndarray, weights: np.ndarray, coef: np.ndarray
) -> float:
    eta = np.clip(design @ coef, -_ETA_CLIP, _ETA_CLIP)
    # log(1 + e^eta) computed stably
    ll = response * eta - np.logaddexp(0.0, eta)
    return float(np.sum(weights * ll))


def weighted_score(
    design: np.ndarray, response: np.ndarray, weights: np.ndarray, coef: np.ndarray
) -> np.ndarray:
    mu = expit(design @ coef)
    return design.T @ (weights * (response - mu))


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 100
    ridge: float = 0.0
    penalize_intercept: bool = False
    intercept_index: int | None = 0
    init: np.ndarray | None = field(default=None, repr=False)


def _check_separation(y: np.ndarray, mu: np.ndarray, ridge: float) -> None:
    """Reject limit solutions that only look converged because of eta clipping.

    An unpenalized likelihood whose score vanishes with every fitted
    probability at machine 0/1 has its maximizer at infinity (the data are
    perfectly separated, possibly degenerately with a constant response).
    """
    if ridge == 0.0 and y.size and float(np.max(np.abs(y - mu))) < 1e-9:
        raise SeparationError(
            "all fitted probabilities saturated at 0/1; the unpenalized "
            "maximum is at infinity (set a ridge penalty to regularize)"
        )


def fit_weighted_logistic(
    design,
    response,
    weights=None,
    options: SolverOptions | None = None,
    column_names: tuple[str, ...] = (),
) -> LogisticFit:
    """Maximize the weighted (optionally ridge-penalized) log-likelihood.

    The ridge penalty (lambda/2)*|b|^2 applies to all columns except the
    intercept unless penalize_intercept is set.  Raises SingularDesignError
    on a rank-deficient weighted design with ridge=0 and SeparationError when
    coefficients diverge with a stalling score.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"design {X.shape} incompatible with response of length {y.size}")
    w = np.ones(y.size) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.size != y.size:
        raise ValueError("weights length does not match response length")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    opts = options or SolverOptions()

    penalty = np.full(X.shape[1], opts.ridge)
    if not opts.penalize_intercept and opts.intercept_index is not None and X.shape[1]:
        if 0 <= opts.intercept_index < X.shape[1]:
            penalty[opts.intercept_index] = 0.0

    def objective(b):
        return weighted_log_likelihood(X, y, w, b) - 0.5 * float(penalty @ (b * b))

    beta = np.zeros(X.shape[1]) if opts.init is None else np.array(opts.init, dtype=float)
    obj = objective(beta)
    grad_norm = np.inf
    for it in range(1, opts.max_iter + 1):
        mu = expit(X @ beta)
        grad = X.T @ (w * (y - mu)) - penalty * beta
        grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
        if grad_norm <= opts.tol:
            _check_separation(y, mu, opts.ridge)
            return LogisticFit(beta, True, it - 1, grad_norm, opts.ridge,
                               tuple(column_names), y.size)
        irls_w = w * mu * (1.0 - mu)
        hess = X.T @ (X * irls_w[:, None]) + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            if opts.ridge == 0.0:
                raise SingularDesignError(
                    "weighted design is rank deficient and no ridge penalty is set"
                ) from None
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # Step-halving keeps the penalized likelihood non-decreasing.
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            cand_obj = objective(cand)
            if cand_obj >= obj - 1e-12:
                beta, obj = cand, cand_obj
                break
            scale *= 0.5
        else:
            beta = beta + scale * step
            obj = objective(beta)
        if np.max(np.abs(beta), initial=0.0) > _COEF_BOUND and grad_norm > opts.tol:
            if opts.ridge == 0.0:
                raise SeparationError(
                    "coefficients diverging with non-vanishing score; "
                    "likely perfect separation (set a ridge penalty to regularize)"
                )
    mu = expit(X @ beta)
    grad = X.T @ (w * (y - mu)) - penalty * beta
    grad_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
    if grad_norm <= opts.tol:
        _check_separation(y, mu, opts.ridge)
        return LogisticFit(beta, True, opts.max_iter, grad_norm, opts.ridge,
                           tuple(column_names), y.size)
    if opts.ridge == 0.0 and np.max(np.abs(beta), initial=0.0) > 0.5 * _COEF_BOUND:
        raise SeparationError(
            "solver hit the iteration limit with diverging coefficients; "
            "likely perfect separation (set a ridge penalty to regularize)"
        )
    return LogisticFit(beta, False, opts.max_iter, grad_norm, opts.ridge,
                       tuple(column_names), y.size)
