"""Gaussian EMOS: rolling-window regression of the predictive mean and variance
on the ensemble mean and variance, fitted by minimum CRPS estimation.

The predictive distribution is ``N(mu, sigma^2)`` with::

    mu      = alpha0 + alpha1 * m
    sigma^2 = beta0  + beta1  * s^2,     beta0 = b0^2, beta1 = b1^2

where ``m`` and ``s^2`` are the ensemble mean and variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from ._normal import norm_cdf, norm_pdf, norm_ppf
from .exceptions import InsufficientDataError

SIGMA_MIN = 0.05
MIN_TRAINING_PAIRS = 10
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianMargin:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def cdf(self, x):
        return norm_cdf((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def ppf(self, p):
        return self.mu + self.sigma * norm_ppf(p)


@dataclass(frozen=True)
class EmosCoefficients:
    alpha0: float
    alpha1: float
    beta0: float
    beta1: float
    converged: bool = True

    def __post_init__(self):
        if not (self.beta0 >= 0 and self.beta1 >= 0):
            raise ValueError("variance coefficients must be nonnegative")
        if not all(math.isfinite(v) for v in (self.alpha0, self.alpha1, self.beta0, self.beta1)):
            raise ValueError("coefficients must be finite")


def _crps_normal(mu, sigma, y):
    z = (y - mu) / sigma
    return sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - _INV_SQRT_PI)


def gaussian_crps(margin: GaussianMargin, y) -> float:
    """Closed-form CRPS of ``N(mu, sigma^2)`` against observation(s) ``y``."""
    out = _crps_normal(margin.mu, margin.sigma, np.asarray(y, dtype=float))
    return float(out) if out.ndim == 0 else out


def predict_margin(coeffs: EmosCoefficients, m: float, s2: float) -> GaussianMargin:
    if s2 < 0:
        raise ValueError("ensemble variance must be nonnegative")
    mu = coeffs.alpha0 + coeffs.alpha1 * m
    var = max(coeffs.beta0 + coeffs.beta1 * s2, SIGMA_MIN**2)
    return GaussianMargin(float(mu), math.sqrt(var))


def _objective(params, m, s2, y):
    a0, a1, b0, b1 = params
    sigma = np.sqrt(np.maximum(b0 * b0 + b1 * b1 * s2, SIGMA_MIN**2))
    z = (y - a0 - a1 * m) / sigma
    crps = sigma * (z * (2.0 * ndtr(z) - 1.0) + 2.0 * np.exp(-0.5 * z * z) * _INV_SQRT_2PI - _INV_SQRT_PI)
    return crps.sum() / crps.size


def emos_objective(params, m, s2, y) -> float:
    """Mean CRPS at unconstrained parameters ``(alpha0, alpha1, b0, b1)``."""
    return _objective(np.asarray(params, float), np.asarray(m, float), np.asarray(s2, float), np.asarray(y, float))


def fit_emos(m, s2, y, *, maxiter: int = 2000, tol: float = 1e-8) -> EmosCoefficients:
    """Fit EMOS coefficients on a training window by minimum mean CRPS.

    Parameters
    ----------
    m, s2, y : array_like
        Ensemble means, ensemble variances and observations of the window.
        Pairs with a missing observation are dropped.
    maxiter : int
        Nelder-Mead iteration cap (per restart).
    tol : float
        Absolute tolerance on the objective.

    Returns
    -------
    EmosCoefficients
        ``converged`` is False when the iteration cap was hit; the best
        iterate found is still returned.

    Notes
    -----
    The fit runs on data centred by the window mean of ``m``, which makes it
    translation equivariant and better conditioned. Nelder-Mead starts from
    least squares estimates of the mean coefficients, ``b0`` equal to the
    residual standard deviation and ``b1 = 0.1``; it is restarted from its own
    optimum until the objective stops improving.
    """
    m = np.asarray(m, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(m) & np.isfinite(s2) & np.isfinite(y)
    m, s2, y = m[ok], s2[ok], y[ok]
    if m.size < MIN_TRAINING_PAIRS:
        raise InsufficientDataError(f"need {MIN_TRAINING_PAIRS} complete training pairs, got {m.size}")
    if np.any(s2 < 0):
        raise ValueError("ensemble variance must be nonnegative")

    shift = float(np.mean(m))
    mc, yc = m - shift, y - shift
    var_m = np.mean(mc * mc)
    a1 = float(np.mean(mc * (yc - yc.mean())) / var_m) if var_m > 0 else 1.0
    a0 = float(yc.mean() - a1 * mc.mean())
    resid_sd = float(np.std(yc - a0 - a1 * mc))
    x0 = np.array([a0, a1, max(resid_sd, SIGMA_MIN), 0.1])
    f0 = _objective(x0, mc, s2, yc)

    x, fx, converged = x0, f0, True
    step = np.array([max(resid_sd, 0.1), 0.1, max(0.5 * resid_sd, 0.05), 0.1])
    for _ in range(5):
        simplex = np.vstack([x, x + np.diag(step)])
        res = minimize(
            _objective, x, args=(mc, s2, yc), method="Nelder-Mead",
            options={"initial_simplex": simplex, "maxiter": maxiter, "xatol": 1e-6, "fatol": tol},
        )
        improved = fx - res.fun
        if res.fun <= fx:
            x, fx = res.x, res.fun
        converged = bool(res.success)
        if improved <= tol:
            break
        step = np.maximum(np.abs(step) * 0.1, 1e-4)

    a0c, a1, b0, b1 = (float(v) for v in x)
    return EmosCoefficients(
        alpha0=a0c + shift - a1 * shift, alpha1=a1, beta0=b0 * b0, beta1=b1 * b1, converged=converged
    )


def fit_emos_window(window) -> EmosCoefficients:
    """Convenience wrapper taking an iterable of ``(m, s2, y)`` triples."""
    arr = np.asarray(list(window), dtype=float).reshape(-1, 3)
    return fit_emos(arr[:, 0], arr[:, 1], arr[:, 2])
