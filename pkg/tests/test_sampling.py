import math

import numpy as np
import pytest

from cobase._normal import norm_cdf, norm_ppf
from cobase.emos import SIGMA_MIN, GaussianMargin, predict_margin, EmosCoefficients
from cobase.sampling import Strategy, draw, random_sample, uniform_quantiles

# Newton inversion of the erfc-based CDF, iterated to convergence
Q25 = -0.6744897501960817


def test_single_quantile_is_median():
    assert uniform_quantiles(GaussianMargin(0, 1), 1).values.tolist() == [0.0]


def test_three_quantiles():
    values = uniform_quantiles(GaussianMargin(0, 1), 3).values
    np.testing.assert_allclose(values, [Q25, 0.0, -Q25], atol=1e-12)


def test_location_scale():
    base = uniform_quantiles(GaussianMargin(0, 1), 3).values
    np.testing.assert_allclose(uniform_quantiles(GaussianMargin(10, 2), 3).values, 10 + 2 * base, atol=1e-12)


@pytest.mark.parametrize("N", [1, 5, 17, 51])
def test_kolmogorov_distance_bound(N):
    margin = GaussianMargin(1.5, 0.7)
    x = uniform_quantiles(margin, N).values
    assert np.all(np.diff(x) > 0)
    F = margin.cdf(x)
    upper = np.arange(1, N + 1) / N - F
    lower = F - np.arange(0, N) / N
    assert max(upper.max(), lower.max()) <= 1 / (N + 1) + 1e-12


def test_quantile_roundtrip_accuracy():
    p = np.concatenate([np.geomspace(1e-8, 0.5, 400), 1 - np.geomspace(1e-8, 0.5, 400)])
    assert np.max(np.abs(norm_cdf(norm_ppf(p)) - p)) <= 1e-10


def test_ppf_against_independent_newton():
    for p in (1e-6, 0.01, 0.3, 0.5, 0.8, 0.999):
        x = 0.0
        for _ in range(200):
            x -= (0.5 * math.erfc(-x / math.sqrt(2)) - p) / (math.exp(-x * x / 2) / math.sqrt(2 * math.pi))
        assert norm_ppf(p) == pytest.approx(x, abs=1e-10)


def test_ppf_edges():
    assert norm_ppf(0.0) == -np.inf and norm_ppf(1.0) == np.inf
    with pytest.raises(ValueError):
        norm_ppf(1.5)


def test_random_sample_deterministic():
    m = GaussianMargin(2, 3)
    np.testing.assert_array_equal(random_sample(m, 10, 42).values, random_sample(m, 10, 42).values)
    assert not np.array_equal(random_sample(m, 10, 42).values, random_sample(m, 10, 43).values)


@pytest.mark.parametrize("seed", [0, 1, 99])
def test_random_sample_moments(seed):
    x = random_sample(GaussianMargin(0, 1), 100_000, seed).values
    assert -0.02 <= x.mean() <= 0.02
    assert 0.99 <= x.std(ddof=1) <= 1.01


def test_random_sample_tight_margin():
    margin = predict_margin(EmosCoefficients(5, 0, 0, 0), 0.0, 0.0)
    assert margin.sigma == SIGMA_MIN
    x = random_sample(margin, 10, 7).values
    assert np.all(np.abs(x - 5) < 6 * SIGMA_MIN)


def test_stratified_slot_is_unimplemented():
    with pytest.raises(NotImplementedError):
        draw(GaussianMargin(0, 1), 5, Strategy.STRATIFIED)
    assert draw(GaussianMargin(0, 1), 5, Strategy.QUANTILE).strategy is Strategy.QUANTILE


def test_invalid_size():
    with pytest.raises(ValueError):
        uniform_quantiles(GaussianMargin(0, 1), 0)
