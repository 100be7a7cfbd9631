"""Discrete samples of size N from a Gaussian predictive margin."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .emos import GaussianMargin


class Strategy(enum.Enum):
    QUANTILE = "Quantile"
    RANDOM = "Random"
    STRATIFIED = "Stratified"


@dataclass(frozen=True)
class MarginSample:
    values: np.ndarray
    strategy: Strategy

    @property
    def N(self) -> int:
        return self.values.size


def uniform_quantiles(margin: GaussianMargin, N: int) -> MarginSample:
    """Equidistant quantiles ``F^-1(i / (N + 1))``, ``i = 1..N``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    levels = np.arange(1, N + 1) / (N + 1)
    return MarginSample(margin.ppf(levels), Strategy.QUANTILE)


def random_sample(margin: GaussianMargin, N: int, seed) -> MarginSample:
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng(seed)
    return MarginSample(margin.mu + margin.sigma * rng.standard_normal(N), Strategy.RANDOM)


def draw(margin: GaussianMargin, N: int, strategy: Strategy, seed=None) -> MarginSample:
    if strategy is Strategy.QUANTILE:
        return uniform_quantiles(margin, N)
    if strategy is Strategy.RANDOM:
        return random_sample(margin, N, seed)
    raise NotImplementedError(f"{strategy.value} sampling is not implemented")
