"""Rank-based reordering of univariate samples.

Every shuffling method builds a reference rank structure (a ``d x N`` matrix
whose rows are permutations of ``1..N``) and reorders sorted margin samples so
that each row reproduces the reference ranks:

* ECC: ranks of the raw ensemble (requires ``N == M``),
* Schaake Shuffle (SSh): ranks of observations on random dates within +/-14
  days of year,
* SimSchaake (SimSSh): ranks of observations on the dates whose raw forecasts
  are closest under the similarity criterion ``similarity_delta``,
* COBASE: ranks of a sample drawn from a fitted parametric copula.
"""
from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass

import numpy as np

from . import copulas
from .copulas import CopulaModel, Family
from .datasets import Archive, ForecastCase, day_of_year, doy_distance
from .exceptions import ConfigError, InsufficientDataError, StructuralError
from .sampling import MarginSample, random_sample, uniform_quantiles

SCHAAKE_HALF_WINDOW = 14


class Source(enum.Enum):
    ECC = "ECC"
    SCHAAKE = "Schaake"
    SIMSCHAAKE = "SimSchaake"
    COBASE = "Cobase"


@dataclass(frozen=True)
class RankMatrix:
    """``d x N`` integer ranks (1 = smallest); each row is a permutation.

    ``source_dates`` lists the archive dates whose observations were read to
    build the structure, so callers can audit for leakage.
    """

    ranks: np.ndarray
    source: Source | None = None
    source_dates: tuple = ()

    def __post_init__(self):
        ranks = np.asarray(self.ranks)
        if ranks.ndim != 2:
            raise StructuralError("ranks must be a 2-D array (d x N)")
        expected = np.arange(1, ranks.shape[1] + 1)
        if not all(np.array_equal(np.sort(row), expected) for row in ranks):
            raise StructuralError("every rank row must be a permutation of 1..N")
        ranks = ranks.astype(np.int64, copy=True)
        ranks.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)

    @property
    def d(self) -> int:
        return self.ranks.shape[0]

    @property
    def N(self) -> int:
        return self.ranks.shape[1]

    def __eq__(self, other):
        if not isinstance(other, RankMatrix):
            return NotImplemented
        return np.array_equal(self.ranks, other.ranks)

    __hash__ = None


def ranks_of(matrix, seed=0, source: Source | None = None, source_dates=()) -> RankMatrix:
    """Row-wise ranks of a ``d x N`` matrix; ties are ordered at random (seeded)."""
    values = np.asarray(matrix, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if values.shape[1] < 1 or not np.all(np.isfinite(values)):
        raise ValueError("ranks_of needs a non-empty finite matrix")
    rng = np.random.default_rng(seed)
    keys = rng.random(values.shape)
    ranks = np.empty(values.shape, dtype=np.int64)
    positions = np.arange(1, values.shape[1] + 1)
    for l in range(values.shape[0]):
        order = np.lexsort((keys[l], values[l]))
        ranks[l, order] = positions
    return RankMatrix(ranks, source, tuple(source_dates))


def shuffle_to_ranks(samples, ref: RankMatrix) -> np.ndarray:
    """Reorder each margin sample so that its ranks follow ``ref``; returns ``d x N``."""
    rows = [np.asarray(s.values if isinstance(s, MarginSample) else s, dtype=float) for s in samples]
    if len(rows) != ref.d:
        raise StructuralError(f"{len(rows)} samples for a {ref.d}-row reference")
    if any(r.size != ref.N for r in rows):
        raise StructuralError(f"every sample must have length {ref.N}")
    ordered = np.sort(np.vstack(rows), axis=1)
    return np.take_along_axis(ordered, ref.ranks - 1, axis=1)


def ecc_reference(raw: ForecastCase, seed=0) -> RankMatrix:
    return ranks_of(raw.members.T, seed, Source.ECC)


def schaake_pool(archive: Archive, date: dt.date) -> np.ndarray:
    """Indices of complete dates within +/-14 days of year of ``date``, excluding it."""
    target = day_of_year(date)
    i = archive.index_of(date) if date in archive._index else -1
    mask = archive.complete_mask()
    if i >= 0:
        mask[i] = False
    near = np.array([doy_distance(day_of_year(day), target) <= SCHAAKE_HALF_WINDOW for day in archive.dates])
    return np.flatnonzero(mask & near)


def schaake_reference(archive: Archive, date: dt.date, N: int, seed=0) -> RankMatrix:
    pool = schaake_pool(archive, date)
    if pool.size < N:
        raise InsufficientDataError(f"Schaake pool for {date} has {pool.size} dates, need {N}")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(pool, size=N, replace=False)) if pool.size > N else pool
    obs = archive.observations[chosen].T
    return ranks_of(obs, rng.integers(2**63), Source.SCHAAKE, [archive.dates[k] for k in chosen])


def ensemble_summary(members):
    """Per-margin ensemble mean and standard deviation (``1/(M-1)`` denominator)."""
    members = np.asarray(members, dtype=float)
    return members.mean(axis=-2), members.std(axis=-2, ddof=1)


def similarity_delta(x_t: ForecastCase, x_tp: ForecastCase) -> float:
    """Root mean squared difference of ensemble means and standard deviations."""
    a = x_t.members if isinstance(x_t, ForecastCase) else np.asarray(x_t, float)
    b = x_tp.members if isinstance(x_tp, ForecastCase) else np.asarray(x_tp, float)
    if a.shape[1] != b.shape[1] or a.shape[0] != b.shape[0]:
        raise StructuralError("forecasts differ in dimension or ensemble size")
    mean_a, sd_a = ensemble_summary(a)
    mean_b, sd_b = ensemble_summary(b)
    return float(np.sqrt(np.mean((mean_a - mean_b) ** 2) + np.mean((sd_a - sd_b) ** 2)))


def _deltas(archive: Archive, current: ForecastCase) -> np.ndarray:
    means, sds = ensemble_summary(archive.forecasts)
    cur_mean, cur_sd = ensemble_summary(current.members)
    return np.sqrt(np.mean((means - cur_mean) ** 2, axis=1) + np.mean((sds - cur_sd) ** 2, axis=1))


def simschaake_dates(archive: Archive, current: ForecastCase, N: int) -> np.ndarray:
    """Indices of the ``N`` most similar complete dates, excluding ``current.date``."""
    if current.members.shape[1] != archive.d:
        raise StructuralError("forecast dimension differs from the archive")
    i = archive._index.get(current.date, -1)
    mask = archive.complete_mask()
    if i >= 0:
        mask[i] = False
    pool = np.flatnonzero(mask)
    if pool.size < N:
        raise InsufficientDataError(f"SimSchaake pool has {pool.size} dates, need {N}")
    delta = _deltas(archive, current)[pool]
    # stable sort keeps the earlier date first on equal delta
    return np.sort(pool[np.argsort(delta, kind="stable")[:N]])


def simschaake_reference(archive: Archive, current: ForecastCase, N: int, seed=0) -> RankMatrix:
    chosen = simschaake_dates(archive, current, N)
    obs = archive.observations[chosen].T
    return ranks_of(obs, seed, Source.SIMSCHAAKE, [archive.dates[k] for k in chosen])


def cobase_reference(model: CopulaModel, N: int, seed=0) -> RankMatrix:
    sample = copulas.sample_copula(model, N, seed)
    return ranks_of(sample.T, seed, Source.COBASE)


# ---------------------------------------------------------------------------
# end-to-end methods
# ---------------------------------------------------------------------------

METHODS = (
    "EMOS-R", "EMOS-Q", "SimSSh-R", "SimSSh", "SSh", "ECC",
    "GCA", "Clayton", "Frank", "Gumbel",
    "COBASE-GCA", "COBASE-Clayton", "COBASE-Frank", "COBASE-Gumbel",
)
_ALIASES = {"EMOS-Q-independent": "EMOS-Q", "EMOS-R-independent": "EMOS-R"}
SHUFFLING_METHODS = frozenset(
    {"SSh", "SimSSh", "ECC", "COBASE-GCA", "COBASE-Clayton", "COBASE-Frank", "COBASE-Gumbel"}
)
COPULA_METHODS = {"GCA": Family.GAUSSIAN, "Clayton": Family.CLAYTON, "Frank": Family.FRANK, "Gumbel": Family.GUMBEL}
COBASE_METHODS = {f"COBASE-{name}": fam for name, fam in COPULA_METHODS.items()}


def canonical_method(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in METHODS:
        raise ConfigError(f"unknown method {name!r}; expected one of {', '.join(METHODS)}")
    return name


def method_family(method: str) -> Family | None:
    method = canonical_method(method)
    return COPULA_METHODS.get(method) or COBASE_METHODS.get(method)


def _seeds(seed, n):
    return [int(s) for s in np.random.SeedSequence(int(seed)).generate_state(n, dtype=np.uint64)]


def split_seed(seed):
    """``(margin_seed, reference_seed)`` derived from a method seed."""
    margin_seed, ref_seed = _seeds(seed, 2)
    return margin_seed, ref_seed


def _uses_random_margins(method):
    return method in ("EMOS-R", "SimSSh-R") or method in COPULA_METHODS


def postprocess_multivariate(
    method: str,
    archive: Archive,
    date: dt.date,
    margins,
    N: int,
    seed=0,
    copula: CopulaModel | None = None,
    window_days: int = 30,
    reference: RankMatrix | None = None,
) -> np.ndarray:
    """Produce one method's ``d x N`` postprocessed forecast for ``date``.

    Parameters
    ----------
    method : str
        A method label (``SSh``, ``COBASE-GCA``, ...).
    archive : Archive
        Forecasts and observations; only the columns of ``margins`` are used,
        so pass an archive restricted to the group being forecast.
    margins : sequence of GaussianMargin
        EMOS predictive distributions, one per archive column.
    copula : CopulaModel, optional
        Pre-fitted copula for the copula and COBASE methods. When omitted it is
        fitted on the observations of the ``window_days`` calendar days before
        ``date``.
    reference : RankMatrix, optional
        Pre-built reference ranks for the shuffling methods.
    """
    method = canonical_method(method)
    margins = list(margins)
    if len(margins) != archive.d:
        raise StructuralError(f"{len(margins)} margins for a {archive.d}-dimensional archive")
    margin_seed, ref_seed = split_seed(seed)
    family = method_family(method)

    if method in COPULA_METHODS:
        model = copula or fit_window_copula(archive, date, family, window_days, seed=ref_seed)
        return copulas.copula_forecast(model, margins, N, ref_seed).T

    margin_seeds = _seeds(margin_seed, len(margins))
    if _uses_random_margins(method):
        samples = [random_sample(m, N, s) for m, s in zip(margins, margin_seeds)]
    else:
        samples = [uniform_quantiles(m, N) for m in margins]

    if method == "EMOS-R":
        return np.vstack([s.values for s in samples])
    if method == "EMOS-Q":
        # no dependence model: each row gets an independent random order
        rng = np.random.default_rng(margin_seed)
        return np.vstack([rng.permutation(s.values) for s in samples])

    if reference is None:
        i = archive.index_of(date)
        if method == "ECC":
            if N != archive.ensemble_size:
                raise ConfigError(f"ECC needs N == M ({archive.ensemble_size}), got N={N}")
            reference = ecc_reference(archive.forecast_case(i), ref_seed)
        elif method == "SSh":
            reference = schaake_reference(archive, date, N, ref_seed)
        elif method in ("SimSSh", "SimSSh-R"):
            reference = simschaake_reference(archive, archive.forecast_case(i), N, ref_seed)
        else:
            model = copula or fit_window_copula(archive, date, family, window_days, seed=ref_seed)
            reference = cobase_reference(model, N, ref_seed)
    return shuffle_to_ranks(samples, reference)


def training_window(archive: Archive, date: dt.date, window_days: int = 30) -> np.ndarray:
    """Indices of dates in ``[date - window_days, date - 1]``."""
    start = date - dt.timedelta(days=window_days)
    return np.array([k for k, day in enumerate(archive.dates) if start <= day < date], dtype=int)


def fit_window_copula(archive: Archive, date, family, window_days=30, seed=0) -> CopulaModel:
    idx = training_window(archive, date, window_days)
    obs = archive.observations[idx]
    obs = obs[np.all(np.isfinite(obs), axis=1)]
    return copulas.fit_copula(obs, family, seed)
