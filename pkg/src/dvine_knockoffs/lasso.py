"""Penalized regression, lambda selection, and the coefficient-difference statistic.

Columns are standardized internally (mean 0, unit variance with 1/n scaling)
and coefficients reported on that scale, which is what makes the original
vs. knockoff coefficient comparison meaningful.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._cd import COEF_CAP, gaussian_cd, logistic_cd
from .errors import ConvergenceError, DegenerateData, DimensionError, SeparationWarning
from .knockoffs import MarginalTransform, quantile_type8

MAX_SWEEPS = 100_000
CD_TOL = 1e-7


@dataclass(frozen=True)
class LassoFit:
    beta: np.ndarray
    intercept: float
    lam: float
    family: str
    converged: bool
    iterations: int
    separation: bool = False


@dataclass(frozen=True)
class LambdaChoice:
    lambda_hat: float
    method: str                      # "cv" or "percentile"
    theta: Optional[float] = None
    replicate_lambdas: tuple = ()


def _standardize(X):
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return np.asfortranarray((X - mean) / std), mean, std


def _lambda_max(Xs, y, family):
    n = Xs.shape[0]
    center = y.mean()
    return float(np.max(np.abs(Xs.T @ (y - center))) / n)


def lasso_fit(X, y, lam, family="gaussian", beta0=None, intercept0=None,
              tol=CD_TOL, max_sweeps=MAX_SWEEPS):
    """L1-penalized fit by coordinate descent at a single lambda.

    ``family`` is "gaussian" (squared error, (1/2n) scaling) or "logistic"
    (binomial deviance via IRLS).  Warm starts accepted through ``beta0``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionError("X must be (n, q) with len(y) = n")
    if lam < 0:
        raise DimensionError("lambda must be nonnegative")
    if family == "logistic" and not set(np.unique(y)) <= {0.0, 1.0}:
        raise DegenerateData("logistic fits need a binary 0/1 response")
    Xs, _, _ = _standardize(X)
    beta = np.zeros(X.shape[1]) if beta0 is None else np.array(beta0, dtype=float)

    if family == "gaussian":
        yc = y - y.mean()
        sweeps, converged = gaussian_cd(Xs, yc, float(lam), beta, tol,
                                        max_sweeps)
        intercept = float(y.mean())
        separation = False
    elif family == "logistic":
        start_intercept = float(np.log(y.mean() / (1 - y.mean()))) \
            if 0 < y.mean() < 1 else 0.0
        if intercept0 is not None:
            start_intercept = float(intercept0)
        sweeps, converged, intercept, separation = logistic_cd(
            Xs, y, float(lam), beta, start_intercept, tol, max_sweeps)
        if separation:
            warnings.warn("coefficients capped; response may be separable",
                          SeparationWarning)
    else:
        raise DimensionError(f"unknown family {family!r}")
    if not converged:
        raise ConvergenceError(
            f"coordinate descent exhausted {max_sweeps} sweeps at lambda={lam}")
    return LassoFit(beta=beta, intercept=intercept, lam=float(lam),
                    family=family, converged=converged, iterations=int(sweeps),
                    separation=separation)


def lambda_path(X, y, family="gaussian", n_points=100, ratio=1e-3):
    """Log-spaced path from lambda_max down to ratio * lambda_max."""
    Xs, _, _ = _standardize(X)
    lam_max = _lambda_max(Xs, np.asarray(y, dtype=float).ravel(), family)
    if lam_max <= 0.0:
        lam_max = 1e-3
    return np.geomspace(lam_max, ratio * lam_max, n_points)


def _deviance(fit, Xs_val, y_val, family):
    eta = fit.intercept + Xs_val @ fit.beta
    if family == "gaussian":
        return float(np.mean((y_val - eta) ** 2))
    p = 1.0 / (1.0 + np.exp(-eta))
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(-2.0 * np.mean(y_val * np.log(p) + (1 - y_val) * np.log1p(-p)))


def cv_lambda(X, y, K=5, family="gaussian", rng=None, n_points=100, ratio=1e-3):
    """K-fold cross-validated lambda on a 100-point warm-started path."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if K < 2 or n < K:
        raise DimensionError("need 2 <= K <= n folds")
    rng = np.random.default_rng(rng)
    lambdas = lambda_path(X, y, family, n_points, ratio)
    perm = rng.permutation(n)
    folds = np.array_split(perm, K)
    deviance = np.zeros((K, len(lambdas)))
    for k, val_idx in enumerate(folds):
        mask = np.ones(n, dtype=bool)
        mask[val_idx] = False
        X_tr, y_tr = X[mask], y[mask]
        X_val, y_val = X[val_idx], y[val_idx]
        # standardize validation columns with the training transform
        mean = X_tr.mean(axis=0)
        std = X_tr.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)
        Xs_val = (X_val - mean) / std
        beta = np.zeros(X.shape[1])
        intercept = None
        for i, lam in enumerate(lambdas):
            fit = lasso_fit(X_tr, y_tr, lam, family, beta0=beta,
                            intercept0=intercept)
            beta = fit.beta
            intercept = fit.intercept
            deviance[k, i] = _deviance(fit, Xs_val, y_val, family)
    mean_dev = deviance.mean(axis=0)
    lam_hat = float(lambdas[int(np.argmin(mean_dev))])
    return LambdaChoice(lambda_hat=lam_hat, method="cv")


def percentile_lasso_lambda(X, y, K=5, M_lasso=10, theta=50.0, rng=None,
                            **cv_kwargs):
    """Percentile of repeated cross-validated lambdas (type-8 quantile).

    theta = 50 is the stabilized median; theta is a percentile in [0, 100].
    """
    if M_lasso < 1:
        raise DimensionError("M_lasso must be at least 1")
    rng = np.random.default_rng(rng)
    reps = []
    for _ in range(M_lasso):
        reps.append(cv_lambda(X, y, K, rng=rng, **cv_kwargs).lambda_hat)
    if M_lasso == 1:
        lam_hat = reps[0]
    else:
        lam_hat = float(quantile_type8(MarginalTransform(np.array(reps)),
                                       theta / 100.0))
    return LambdaChoice(lambda_hat=lam_hat, method="percentile",
                        theta=float(theta), replicate_lambdas=tuple(reps))


def lcd_statistic(X, X_tilde, y, lam, family="gaussian"):
    """Lasso coefficient difference on the augmented design [X, X~]:
    W_j = |b_j| - |b_(j+p)|."""
    X = np.asarray(X, dtype=float)
    X_tilde = np.asarray(X_tilde, dtype=float)
    if X.shape != X_tilde.shape:
        raise DimensionError("X and X_tilde must have matching shapes")
    p = X.shape[1]
    fit = lasso_fit(np.hstack([X, X_tilde]), y, lam, family)
    return np.abs(fit.beta[:p]) - np.abs(fit.beta[p:])
