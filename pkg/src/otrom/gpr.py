"""Exact Gaussian process regression with a squared-exponential kernel.

Hyperparameters maximize the log marginal likelihood over a log-space grid
followed by coordinate-descent refinement.  The prior mean is the constant
sample mean of the targets.  Scalar outputs only; vector targets are handled
upstream as independent per-component models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .errors import CholeskyFailure, DegenerateData

__all__ = [
    "GPRModel",
    "GprOptions",
    "se_kernel",
    "gpr_fit",
    "gpr_predict",
    "make_gpr",
    "log_marginal_likelihood",
]

_LOG_2PI = np.log(2.0 * np.pi)


def se_kernel(x, x_prime, sigma_f2: float, length_scale: float):
    """Squared-exponential covariance sigma_f^2 exp(-|x - x'|^2 / (2 l^2))."""
    if length_scale <= 0:
        raise ValueError("length_scale must be positive")
    d = np.asarray(x, dtype=np.float64) - np.asarray(x_prime, dtype=np.float64)
    return sigma_f2 * np.exp(-0.5 * (d / length_scale) ** 2)


def _kernel_matrix(x1: np.ndarray, x2: np.ndarray, sigma_f2: float,
                   length_scale: float) -> np.ndarray:
    d = x1[:, None] - x2[None, :]
    return sigma_f2 * np.exp(-0.5 * (d / length_scale) ** 2)


@dataclass(frozen=True)
class GprOptions:
    grid_points: int = 5
    refine_sweeps: int = 50
    jitter_escalations: int = 4


@dataclass(frozen=True)
class GPRModel:
    """Fitted posterior state; immutable and shareable across threads."""

    train_x: np.ndarray
    train_y: np.ndarray
    sigma_f2: float
    length_scale: float
    noise: float
    mean_const: float
    chol_lower: np.ndarray
    weights: np.ndarray  # (K + noise I)^-1 (y - mean)


def _chol_with_jitter(K: np.ndarray, noise: float, escalations: int):
    """Cholesky of K + noise I, escalating jitter on failure.

    Returns (lower factor, effective noise actually on the diagonal).
    """
    n = K.shape[0]
    base = 1e-10 * np.trace(K) / n
    extra = 0.0
    for attempt in range(escalations + 2):
        try:
            L = cholesky(K + (noise + extra) * np.eye(n), lower=True)
            return L, noise + extra
        except LinAlgError:
            if attempt > escalations:
                break
            extra = base if extra == 0.0 else extra * 10.0
    raise CholeskyFailure(
        f"kernel matrix not SPD after jitter {extra:g} (noise {noise:g})"
    )


def log_marginal_likelihood(x: np.ndarray, y: np.ndarray, sigma_f2: float,
                            length_scale: float, noise: float,
                            mean_const: float, with_grad: bool = False):
    """Log p(y | x, theta), optionally with its gradient.

    The gradient is taken with respect to (log sigma_f2, log length_scale,
    log noise); the constant prior mean is fixed, not a hyperparameter.
    """
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(y, dtype=np.float64) - mean_const
    n = x.size
    K_se = _kernel_matrix(x, x, sigma_f2, length_scale)
    K = K_se + noise * np.eye(n)
    L = cholesky(K, lower=True)  # caller handles LinAlgError
    alpha = cho_solve((L, True), r)
    lml = (-0.5 * float(r @ alpha)
           - float(np.log(np.diag(L)).sum())
           - 0.5 * n * _LOG_2PI)
    if not with_grad:
        return lml
    K_inv = cho_solve((L, True), np.eye(n))
    d2 = (x[:, None] - x[None, :]) ** 2
    grads = np.empty(3)
    for k, dK in enumerate((
        K_se,                                   # d/dlog sigma_f2
        K_se * d2 / length_scale ** 2,          # d/dlog length_scale
        noise * np.eye(n),                      # d/dlog noise
    )):
        grads[k] = 0.5 * (float(alpha @ dK @ alpha) - float((K_inv * dK).sum()))
    return lml, grads


def _lml_or_neginf(x, r_plus_mean, mean, params) -> float:
    try:
        return log_marginal_likelihood(x, r_plus_mean, params[0], params[1],
                                       params[2], mean)
    except LinAlgError:
        return -np.inf


def gpr_fit(x, y, opts: GprOptions | None = None) -> GPRModel:
    """Fit hyperparameters by maximizing the log marginal likelihood.

    Search: grid_points^3 log grid over (sigma_f2, length_scale, noise)
    spanning the data scales, then coordinate-descent refinement with a
    shrinking multiplicative step.
    """
    if opts is None:
        opts = GprOptions()
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError("x and y sizes differ")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    if np.unique(x).size < 2:
        raise DegenerateData("need at least two distinct inputs")

    mean = float(y.mean())
    r = y - mean
    s2 = max(float(r.var()), 1e-12)
    span = float(x.max() - x.min())
    gaps = np.diff(np.unique(x))
    min_gap = float(gaps.min())
    k = opts.grid_points

    sigma_grid = s2 * np.logspace(-2, 2, k)
    l_grid = np.geomspace(max(0.5 * min_gap, 1e-2 * span), 2.0 * span, k)
    noise_grid = s2 * np.logspace(-8, 0, k)

    best = None
    best_lml = -np.inf
    for s in sigma_grid:
        for l in l_grid:
            for t in noise_grid:
                lml = _lml_or_neginf(x, y, mean, (s, l, t))
                if lml > best_lml:
                    best_lml, best = lml, (s, l, t)
    if best is None:
        raise CholeskyFailure("no hyperparameter candidate was factorizable")

    params = np.array(best)
    step = 2.0
    for _ in range(opts.refine_sweeps):
        improved = False
        for idx in range(3):
            for factor in (step, 1.0 / step):
                trial = params.copy()
                trial[idx] *= factor
                lml = _lml_or_neginf(x, y, mean, trial)
                if lml > best_lml:
                    best_lml, params, improved = lml, trial, True
        if not improved:
            step = np.sqrt(step)
            if step < 1.001:
                break

    return make_gpr(x, y, float(params[0]), float(params[1]), float(params[2]),
                    mean_const=mean, jitter_escalations=opts.jitter_escalations)


def make_gpr(x, y, sigma_f2: float, length_scale: float, noise: float,
             mean_const: float | None = None,
             jitter_escalations: int = 4) -> GPRModel:
    """Build a model with fixed hyperparameters (no optimization)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    mean = float(y.mean()) if mean_const is None else float(mean_const)
    K = _kernel_matrix(x, x, sigma_f2, length_scale)
    L, effective_noise = _chol_with_jitter(K, noise, jitter_escalations)
    weights = cho_solve((L, True), y - mean)
    return GPRModel(train_x=x, train_y=y, sigma_f2=sigma_f2,
                    length_scale=length_scale, noise=effective_noise,
                    mean_const=mean, chol_lower=L, weights=weights)


def gpr_predict(model: GPRModel, x_star):
    """Posterior mean and predictive variance at new inputs.

    Variance includes the observation noise; tiny negative values from
    round-off are clamped to zero.
    """
    xs = np.atleast_1d(np.asarray(x_star, dtype=np.float64))
    K_star = _kernel_matrix(model.train_x, xs, model.sigma_f2,
                            model.length_scale)
    mean = model.mean_const + K_star.T @ model.weights
    v = solve_triangular(model.chol_lower, K_star, lower=True)
    var = model.sigma_f2 - (v ** 2).sum(axis=0) + model.noise
    var = np.maximum(var, 0.0)
    if np.isscalar(x_star) or np.asarray(x_star).ndim == 0:
        return float(mean[0]), float(var[0])
    return mean, var
