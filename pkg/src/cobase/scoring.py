"""Proper scores for ensemble forecasts and the Diebold-Mariano statistic.

All scores are negatively oriented: lower is better.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import StructuralError


class ScoreKind(enum.Enum):
    CRPS = "CRPS"
    ES = "ES"
    VS = "VS"


@dataclass(frozen=True)
class ScoreSeries:
    method: str
    score_kind: ScoreKind
    dates: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.dates),):
            raise StructuralError("values and dates differ in length")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("scores must be finite and nonnegative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))


def crps_ensemble(members, y: float) -> float:
    """Ensemble CRPS, ``mean|x_m - y| - 1/(2 M^2) sum_n sum_m |x_n - x_m|``.

    The double sum is evaluated in ``O(M log M)`` from the sorted members.
    """
    x = np.sort(np.asarray(members, dtype=float).ravel())
    M = x.size
    if M < 1:
        raise ValueError("need at least one member")
    spread = 2.0 * np.dot(2.0 * np.arange(1, M + 1) - M - 1, x)
    return float(np.mean(np.abs(x - y)) - spread / (2.0 * M * M))


def energy_score(members, y) -> float:
    """Energy score of an ``M x d`` ensemble against a ``d`` observation vector."""
    x = np.asarray(members, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != y.size:
        raise StructuralError(f"members have dimension {x.shape[1]}, observation {y.size}")
    M = x.shape[0]
    first = np.mean(np.sqrt(np.sum((x - y) ** 2, axis=1)))
    diff = x[:, None, :] - x[None, :, :]
    second = np.sum(np.sqrt(np.sum(diff * diff, axis=2))) / (2.0 * M * M)
    return float(first - second)


def variogram_score(members, y, p: float = 1.0, weights=None) -> float:
    """Variogram score of order ``p``; unit weights by default."""
    if not p > 0:
        raise ValueError("order p must be positive")
    x = np.asarray(members, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if x.ndim == 1:
        x = x[:, None]
    d = y.size
    if x.shape[1] != d:
        raise StructuralError(f"members have dimension {x.shape[1]}, observation {d}")
    w = np.ones((d, d)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (d, d) or np.any(w < 0):
        raise ValueError("weights must be a nonnegative d x d matrix")
    obs_vario = np.abs(y[:, None] - y[None, :]) ** p
    ens_vario = np.mean(np.abs(x[:, :, None] - x[:, None, :]) ** p, axis=0)
    return float(np.sum(w * (obs_vario - ens_vario) ** 2))


def dm_statistic(a, b) -> float:
    """Diebold-Mariano statistic of the loss differential ``a - b``.

    ``mean(d) / sqrt(var(d) / n)`` with the lag-0 sample variance. Positive
    values mean ``a`` has the higher (worse) mean score. A zero variance gives
    ``0`` when the mean is zero and a signed infinity otherwise.
    """
    if isinstance(a, ScoreSeries) and isinstance(b, ScoreSeries):
        if a.dates != b.dates:
            raise StructuralError("score series cover different dates")
        if a.score_kind != b.score_kind:
            raise StructuralError("score series are of different kinds")
    va = a.values if isinstance(a, ScoreSeries) else np.asarray(a, dtype=float)
    vb = b.values if isinstance(b, ScoreSeries) else np.asarray(b, dtype=float)
    if va.shape != vb.shape or va.ndim != 1:
        raise StructuralError("score series must be 1-D and of equal length")
    n = va.size
    if n < 2:
        raise ValueError("need at least two dates")
    diff = va - vb
    mean = math.fsum(diff) / n
    var = math.fsum((diff - mean) ** 2) / (n - 1)
    if var == 0.0:
        return 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    return mean / math.sqrt(var / n)
