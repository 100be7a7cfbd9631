"""Parametric copulas: Gaussian, Clayton, Frank and Gumbel.

Fitting works on a window of observations (``n x d``). The Gaussian copula is
fitted on latent normal scores; the exchangeable Archimedean families get a
single parameter from the average pairwise Kendall's tau.

Archimedean samples use the Marshall-Olkin frailty construction
``U_l = psi(E_l / V)`` with ``E_l`` standard exponential and ``V`` drawn from
the family's frailty distribution:

=========  ===========================================  =======================
family     generator inverse ``psi(t)``                 frailty ``V``
=========  ===========================================  =======================
Clayton    ``(1 + t) ** (-1/theta)``                    Gamma(1/theta, 1)
Gumbel     ``exp(-t ** (1/theta))``                     positive stable(1/theta)
Frank      ``-log(1 - (1 - e^-theta) e^-t) / theta``    logarithmic(1 - e^-theta)
=========  ===========================================  =======================
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy.stats import kendalltau

from ._normal import norm_cdf, norm_ppf
from .emos import GaussianMargin
from .exceptions import InsufficientDataError, StructuralError

MIN_WINDOW = 5
U_CLAMP = 1e-12
EIGEN_FLOOR = 1e-6
CLAYTON_THETA_MIN = 1e-4
GUMBEL_THETA_MIN = 1.0
FRANK_THETA_MIN = 1e-4
FRANK_THETA_MAX = 35.0
TAU_MAX = 0.95


class Family(enum.Enum):
    GAUSSIAN = "Gaussian"
    CLAYTON = "Clayton"
    FRANK = "Frank"
    GUMBEL = "Gumbel"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, cls):
            return value
        for member in cls:
            if member.value.lower() == str(value).lower() or (
                str(value).upper() == "GCA" and member is cls.GAUSSIAN
            ):
                return member
        raise ValueError(f"unknown copula family {value!r}")


class TiedColumnWarning(UserWarning):
    """A window column was constant; its ranks were broken at random."""


@dataclass(frozen=True)
class CopulaModel:
    family: Family
    d: int
    sigma: np.ndarray | None = None
    theta: float | None = None
    clamped: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.family is Family.GAUSSIAN:
            sigma = np.asarray(self.sigma, dtype=float)
            if sigma.shape != (self.d, self.d):
                raise StructuralError("correlation matrix shape does not match d")
            if not np.allclose(sigma, sigma.T, atol=1e-12) or not np.allclose(np.diag(sigma), 1.0, atol=1e-12):
                raise ValueError("sigma must be a symmetric matrix with unit diagonal")
            if np.linalg.eigvalsh(sigma).min() < 1e-8:
                raise ValueError("sigma is not positive definite")
            sigma = sigma.copy()
            sigma.setflags(write=False)
            object.__setattr__(self, "sigma", sigma)
            return
        theta = self.theta
        if theta is None or not math.isfinite(theta):
            raise ValueError("Archimedean copulas need a finite theta")
        if self.family is Family.CLAYTON and not theta > 0:
            raise ValueError("Clayton needs theta > 0")
        if self.family is Family.GUMBEL and not theta >= 1:
            raise ValueError("Gumbel needs theta >= 1")
        if self.family is Family.FRANK:
            if theta == 0 or abs(theta) > FRANK_THETA_MAX:
                raise ValueError(f"Frank needs 0 < |theta| <= {FRANK_THETA_MAX}")
            if theta < 0 and self.d > 2:
                raise ValueError("negative Frank theta is only valid for d = 2")

    @classmethod
    def gaussian(cls, sigma) -> "CopulaModel":
        sigma = np.asarray(sigma, dtype=float)
        return cls(Family.GAUSSIAN, sigma.shape[0], sigma=sigma)


# ---------------------------------------------------------------------------
# latent normal scores and the Gaussian copula
# ---------------------------------------------------------------------------

def _column_ranks(col, rng):
    # ties are ordered by a random key: the same as an infinitesimal jitter
    order = np.lexsort((rng.random(col.size), col))
    ranks = np.empty(col.size, dtype=np.int64)
    ranks[order] = np.arange(1, col.size + 1)
    return ranks


def pit_to_normal_scores(window_obs, seed=0) -> np.ndarray:
    """Map each column to ``Phi^-1(rank / (n + 1))`` using within-window ranks.

    Ties are broken at random (seeded); a constant column raises a
    :class:`TiedColumnWarning`.
    """
    obs = np.asarray(window_obs, dtype=float)
    if obs.ndim != 2:
        raise StructuralError("window must be a 2-D array (n x d)")
    n, d = obs.shape
    if n < MIN_WINDOW:
        raise InsufficientDataError(f"need at least {MIN_WINDOW} rows, got {n}")
    if not np.all(np.isfinite(obs)):
        raise StructuralError("window contains missing values")
    rng = np.random.default_rng(seed)
    scores = np.empty_like(obs)
    levels = norm_ppf(np.arange(1, n + 1) / (n + 1))
    for j in range(d):
        col = obs[:, j]
        if np.all(col == col[0]):
            warnings.warn(f"column {j} is constant, ranks broken at random", TiedColumnWarning, stacklevel=2)
        scores[:, j] = levels[_column_ranks(col, rng) - 1]
    return scores


def nearest_correlation(matrix, floor: float = EIGEN_FLOOR) -> np.ndarray:
    """Clip eigenvalues at ``floor`` and rescale back to a unit diagonal."""
    sym = 0.5 * (np.asarray(matrix, dtype=float) + np.asarray(matrix, dtype=float).T)
    evals, evecs = np.linalg.eigh(sym)
    if evals.min() < floor:
        sym = (evecs * np.maximum(evals, floor)) @ evecs.T
    scale = 1.0 / np.sqrt(np.diag(sym))
    out = sym * scale[:, None] * scale[None, :]
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0)
    return out


def fit_gaussian_copula(window_obs, seed=0) -> CopulaModel:
    """Shrunk correlation of the normal scores.

    ``Sigma = (1 - lam) R + lam I`` with ``lam = min(0.5, d / n)``, then
    repaired to a valid correlation matrix.
    """
    scores = pit_to_normal_scores(window_obs, seed)
    n, d = scores.shape
    if d == 1:
        return CopulaModel.gaussian(np.ones((1, 1)))
    R = np.corrcoef(scores, rowvar=False)
    lam = min(0.5, d / n)
    sigma = (1.0 - lam) * R + lam * np.eye(d)
    return CopulaModel.gaussian(nearest_correlation(sigma))


# ---------------------------------------------------------------------------
# Kendall's tau inversion
# ---------------------------------------------------------------------------

def _simpson(f, a, b, tol, whole, fa, fm, fb, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_simpson(f, a, m, 0.5 * tol, left, fa, flm, fm, depth - 1)
            + _simpson(f, m, b, 0.5 * tol, right, fm, frm, fb, depth - 1))


def adaptive_simpson(f, a: float, b: float, rtol: float = 1e-10, max_depth: int = 50) -> float:
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = max(rtol * abs(whole), 1e-300)
    return _simpson(f, a, b, tol, whole, fa, fm, fb, max_depth)


def _debye_integrand(t):
    return 1.0 if t == 0.0 else t / math.expm1(t)


def debye1(x: float) -> float:
    """First-order Debye function ``D1(x) = (1/x) int_0^x t / (e^t - 1) dt``."""
    if x == 0:
        return 1.0
    if x < 0:
        return debye1(-x) - 0.5 * x
    return adaptive_simpson(_debye_integrand, 0.0, x) / x


def frank_tau(theta: float) -> float:
    """Kendall's tau of the Frank copula, ``1 - 4/theta (1 - D1(theta))``."""
    if theta == 0:
        return 0.0
    if theta < 0:
        return -frank_tau(-theta)
    return 1.0 - 4.0 / theta * (1.0 - debye1(theta))


@lru_cache(maxsize=4096)
def frank_theta_from_tau(tau: float) -> float:
    """Bisection on ``(0, 35]`` for positive tau, odd symmetry for negative."""
    if tau < 0:
        return -frank_theta_from_tau(-tau)
    lo, hi = 0.0, FRANK_THETA_MAX
    if tau >= frank_tau(hi):
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if frank_tau(mid) < tau:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def average_kendall_tau(window_obs) -> float:
    obs = np.asarray(window_obs, dtype=float)
    d = obs.shape[1]
    if d < 2:
        return 0.0
    taus = []
    for i, j in combinations(range(d), 2):
        tau = kendalltau(obs[:, i], obs[:, j]).statistic
        taus.append(0.0 if np.isnan(tau) else tau)
    return float(np.mean(taus))


def theta_from_tau(tau: float, family, d: int = 2):
    """Invert Kendall's tau for an Archimedean family.

    Returns ``(theta, clamped)`` where ``clamped`` tells whether tau fell
    outside the family's admissible range.
    """
    family = Family.parse(family)
    tau = float(tau)
    clamped = False
    if tau > TAU_MAX:
        tau, clamped = TAU_MAX, True
    if family is Family.CLAYTON:
        if tau <= 0:
            return CLAYTON_THETA_MIN, True
        return max(2.0 * tau / (1.0 - tau), CLAYTON_THETA_MIN), clamped
    if family is Family.GUMBEL:
        if tau <= 0:
            return GUMBEL_THETA_MIN, tau < 0
        return 1.0 / (1.0 - tau), clamped
    if family is Family.FRANK:
        if abs(tau) < 1e-6:
            return math.copysign(FRANK_THETA_MIN, tau), True
        if tau < 0 and d > 2:
            return FRANK_THETA_MIN, True
        theta = frank_theta_from_tau(tau)
        if abs(theta) < FRANK_THETA_MIN:
            return math.copysign(FRANK_THETA_MIN, theta), True
        return theta, clamped or abs(theta) >= FRANK_THETA_MAX
    raise ValueError(f"{family.value} is not an Archimedean family")


def fit_archimedean(window_obs, family) -> CopulaModel:
    """One-parameter exchangeable Archimedean fit by average Kendall's tau inversion."""
    family = Family.parse(family)
    obs = np.asarray(window_obs, dtype=float)
    if obs.ndim != 2:
        raise StructuralError("window must be a 2-D array (n x d)")
    if obs.shape[0] < MIN_WINDOW:
        raise InsufficientDataError(f"need at least {MIN_WINDOW} rows, got {obs.shape[0]}")
    if not np.all(np.isfinite(obs)):
        raise StructuralError("window contains missing values")
    d = obs.shape[1]
    theta, clamped = theta_from_tau(average_kendall_tau(obs), family, d)
    return CopulaModel(family, d, theta=theta, clamped=clamped)


def fit_copula(window_obs, family, seed=0) -> CopulaModel:
    family = Family.parse(family)
    if family is Family.GAUSSIAN:
        return fit_gaussian_copula(window_obs, seed)
    return fit_archimedean(window_obs, family)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _positive_stable(alpha, size, rng):
    """Chambers-Mallows-Stuck draw with Laplace transform ``exp(-s**alpha)``."""
    if alpha == 1.0:
        return np.ones(size)
    angle = rng.uniform(0.0, np.pi, size)
    expo = rng.standard_exponential(size)
    return (np.sin(alpha * angle) / np.sin(angle) ** (1.0 / alpha)) * (
        np.sin((1.0 - alpha) * angle) / expo
    ) ** ((1.0 - alpha) / alpha)


def _logarithmic(theta, size, rng):
    """Kemp's algorithm for the logarithmic law with ``p = 1 - exp(-theta)``."""
    p = -math.expm1(-theta)
    v = rng.random(size)
    u = rng.random(size)
    out = np.ones(size)
    big = v < p
    # q = 1 - (1 - p) ** u, written through theta for accuracy
    q = -np.expm1(-theta * u[big])
    vb = v[big]
    k = np.ones(vb.size)
    low = vb <= q * q
    with np.errstate(divide="ignore"):
        k[low] = np.floor(1.0 + np.log(vb[low]) / np.log(q[low]))
    k[(vb > q * q) & (vb <= q)] = 2.0
    out[big] = k
    return out


def _frank_conditional(theta, N, rng):
    u = rng.random(N)
    w = rng.random(N)
    a = np.exp(-theta * u)
    v = -np.log1p(w * np.expm1(-theta) / (w + (1.0 - w) * a)) / theta
    return np.column_stack([u, v])


def sample_copula(model: CopulaModel, N: int, seed) -> np.ndarray:
    """Draw ``N`` points from the copula; returns an ``N x d`` array in (0, 1)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng(seed)
    d = model.d
    family = model.family
    if family is Family.GAUSSIAN:
        try:
            chol = np.linalg.cholesky(model.sigma)
        except np.linalg.LinAlgError as exc:  # unreachable for a valid model
            raise StructuralError("Cholesky factorisation failed") from exc
        u = norm_cdf(rng.standard_normal((N, d)) @ chol.T)
    elif family is Family.FRANK and model.theta < 0:
        u = _frank_conditional(model.theta, N, rng)
    else:
        theta = model.theta
        if family is Family.CLAYTON:
            frailty = rng.gamma(1.0 / theta, 1.0, N)
        elif family is Family.GUMBEL:
            frailty = _positive_stable(1.0 / theta, N, rng)
        else:
            frailty = _logarithmic(theta, N, rng)
        t = rng.standard_exponential((N, d)) / frailty[:, None]
        if family is Family.CLAYTON:
            u = np.exp(-np.log1p(t) / theta)
        elif family is Family.GUMBEL:
            u = np.exp(-(t ** (1.0 / theta)))
        else:
            u = -np.log1p(np.expm1(-theta) * np.exp(-t)) / theta
    return np.clip(u, U_CLAMP, 1.0 - U_CLAMP)


def gca_transform(model: CopulaModel, margins, N: int, seed) -> np.ndarray:
    """Map a Gaussian copula sample through each margin's quantile function.

    Returns an ``N x d`` array: the classical Gaussian copula approach forecast.
    """
    if model.family is not Family.GAUSSIAN:
        raise StructuralError("gca_transform needs a Gaussian copula")
    return copula_forecast(model, margins, N, seed)


def copula_forecast(model: CopulaModel, margins, N: int, seed) -> np.ndarray:
    margins = list(margins)
    if len(margins) != model.d:
        raise StructuralError(f"{len(margins)} margins for a {model.d}-dimensional copula")
    u = sample_copula(model, N, seed)
    mu = np.array([m.mu for m in margins])
    sd = np.array([m.sigma for m in margins])
    return mu[None, :] + sd[None, :] * norm_ppf(u)


__all__ = [
    "CopulaModel",
    "Family",
    "GaussianMargin",
    "TiedColumnWarning",
    "adaptive_simpson",
    "average_kendall_tau",
    "copula_forecast",
    "debye1",
    "fit_archimedean",
    "fit_copula",
    "fit_gaussian_copula",
    "frank_tau",
    "frank_theta_from_tau",
    "gca_transform",
    "nearest_correlation",
    "pit_to_normal_scores",
    "sample_copula",
    "theta_from_tau",
]
