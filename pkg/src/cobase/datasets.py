"""Archive data model, CSV ingestion and a seeded synthetic multi-station generator.

Forecast and observation archives are stored as dense arrays indexed by date:

* ``forecasts`` has shape ``(T, M, d)`` (dates, members, margins),
* ``observations`` has shape ``(T, d)`` with ``NaN`` marking a missing value.

CSV layout::

    forecasts.csv     date,station,variable,member_1,...,member_M
    observations.csv  date,station,variable,value

Missing observations are written as the literal token ``NA``.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import FormatError, StructuralError

VARIABLES = ("T2m", "DPT")
MISSING_TOKEN = "NA"


@dataclass(frozen=True, order=True)
class MarginId:
    """One forecast margin: a (station, variable) pair."""

    station: str
    variable: str = "T2m"

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ValueError(f"unknown variable {self.variable!r}, expected one of {VARIABLES}")

    def __str__(self):
        return f"{self.station}:{self.variable}"

    @classmethod
    def parse(cls, text: str) -> "MarginId":
        station, _, variable = text.partition(":")
        return cls(station, variable or "T2m")


@dataclass(frozen=True)
class ForecastCase:
    """Raw ensemble for one date, ``members`` is ``M x d``."""

    date: dt.date
    members: np.ndarray
    margin_ids: tuple

    def __post_init__(self):
        members = np.asarray(self.members, dtype=float)
        if members.ndim != 2:
            raise StructuralError("members must be a 2-D array (M x d)")
        if members.shape[0] < 2:
            raise StructuralError("an ensemble needs at least 2 members")
        if members.shape[1] != len(self.margin_ids):
            raise StructuralError("members column count does not match margin_ids")
        if not np.all(np.isfinite(members)):
            raise StructuralError(f"non-finite forecast value on {self.date}")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "margin_ids", tuple(self.margin_ids))

    @property
    def M(self) -> int:
        return self.members.shape[0]

    @property
    def d(self) -> int:
        return self.members.shape[1]


@dataclass(frozen=True)
class ObservationVector:
    date: dt.date
    values: np.ndarray

    @property
    def complete(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True)
class Archive:
    """Date-aligned forecast and observation archive.

    Immutable after construction; array views handed out are read-only.
    """

    dates: tuple
    forecasts: np.ndarray
    observations: np.ndarray
    margin_ids: tuple
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dates = tuple(self.dates)
        forecasts = np.array(self.forecasts, dtype=float)
        observations = np.array(self.observations, dtype=float)
        margin_ids = tuple(self.margin_ids)
        if forecasts.ndim != 3:
            raise StructuralError("forecasts must have shape (T, M, d)")
        T, M, d = forecasts.shape
        if len(dates) != T or observations.shape != (T, d):
            raise StructuralError("dates, forecasts and observations are not aligned")
        if len(margin_ids) != d or len(set(margin_ids)) != d:
            raise StructuralError("margin ids must be unique and match the margin count")
        if M < 2:
            raise StructuralError("ensemble size must be at least 2")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise StructuralError("dates must be strictly increasing")
        if not np.all(np.isfinite(forecasts)):
            raise StructuralError("forecasts contain non-finite values")
        forecasts.setflags(write=False)
        observations.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "forecasts", forecasts)
        object.__setattr__(self, "observations", observations)
        object.__setattr__(self, "margin_ids", margin_ids)
        object.__setattr__(self, "_index", {day: i for i, day in enumerate(dates)})

    @property
    def ensemble_size(self) -> int:
        return self.forecasts.shape[1]

    @property
    def d(self) -> int:
        return self.forecasts.shape[2]

    def __len__(self):
        return len(self.dates)

    def index_of(self, date: dt.date) -> int:
        try:
            return self._index[date]
        except KeyError:
            raise KeyError(f"date {date} not in archive") from None

    def forecast_case(self, i: int) -> ForecastCase:
        return ForecastCase(self.dates[i], self.forecasts[i], self.margin_ids)

    def observation(self, i: int) -> ObservationVector:
        return ObservationVector(self.dates[i], self.observations[i])

    def complete_mask(self) -> np.ndarray:
        """Boolean mask of dates whose observation vector has no missing value."""
        return np.all(np.isfinite(self.observations), axis=1)

    def select_margins(self, margin_ids) -> "Archive":
        cols = [self.margin_ids.index(m) for m in margin_ids]
        return Archive(self.dates, self.forecasts[:, :, cols], self.observations[:, cols], tuple(margin_ids))

    def equals(self, other: "Archive", atol: float = 1e-9) -> bool:
        return (
            self.dates == other.dates
            and self.margin_ids == other.margin_ids
            and self.forecasts.shape == other.forecasts.shape
            and np.allclose(self.forecasts, other.forecasts, rtol=0, atol=atol)
            and np.array_equal(np.isnan(self.observations), np.isnan(other.observations))
            and np.allclose(self.observations, other.observations, rtol=0, atol=atol, equal_nan=True)
        )


def day_of_year(date: dt.date) -> int:
    """Day of year in 1..365; day 366 of leap years is folded onto 365."""
    return min(date.timetuple().tm_yday, 365)


def doy_distance(a: int, b: int) -> int:
    """Circular distance between two day-of-year values on a 365-day cycle."""
    diff = abs(a - b) % 365
    return min(diff, 365 - diff)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _parse_date(text, path, lineno):
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: column 'date': invalid ISO date {text!r}") from None


def _parse_value(text, path, lineno, column, allow_missing):
    if allow_missing and text == MISSING_TOKEN:
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"{path}:{lineno}: column {column!r}: cannot parse {text!r}") from None
    if not math.isfinite(value):
        raise FormatError(f"{path}:{lineno}: column {column!r}: non-finite value {text!r}")
    return value


def _read_rows(path):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        rows = [(i + 2, row) for i, row in enumerate(reader) if row]
    return path, [h.strip() for h in header], rows


def load_archive(forecast_path, observation_path) -> Archive:
    """Read a forecast/observation CSV pair into an :class:`Archive`.

    Raises
    ------
    FormatError
        Bad header, unparseable value (row and column are named in the message).
    StructuralError
        Inconsistent ensemble size, duplicate (date, station, variable) keys,
        missing margins, or observations for dates without forecasts.
    """
    fpath, header, rows = _read_rows(forecast_path)
    if header[:3] != ["date", "station", "variable"] or len(header) < 5:
        raise FormatError(f"{fpath}: header must be date,station,variable,member_1,...,member_M")
    for j, name in enumerate(header[3:], start=1):
        if name != f"member_{j}":
            raise FormatError(f"{fpath}: header column {name!r} should be 'member_{j}'")

    per_date: dict[dt.date, dict[MarginId, list[float]]] = {}
    ens_size = None
    for lineno, row in rows:
        date = _parse_date(row[0].strip(), fpath, lineno)
        if len(row) < 4:
            raise FormatError(f"{fpath}:{lineno}: too few columns")
        try:
            margin = MarginId(row[1].strip(), row[2].strip())
        except ValueError as exc:
            raise FormatError(f"{fpath}:{lineno}: column 'variable': {exc}") from None
        cells = [c.strip() for c in row[3:]]
        while cells and cells[-1] == "":
            cells.pop()
        if ens_size is None:
            ens_size = len(cells)
        elif len(cells) != ens_size:
            raise StructuralError(
                f"{fpath}:{lineno}: {len(cells)} members on {date}, expected {ens_size}"
            )
        if len(cells) > len(header) - 3:
            raise FormatError(f"{fpath}:{lineno}: more members than header columns")
        values = [
            _parse_value(c, fpath, lineno, header[3 + k], allow_missing=False)
            for k, c in enumerate(cells)
        ]
        slot = per_date.setdefault(date, {})
        if margin in slot:
            raise StructuralError(f"{fpath}:{lineno}: duplicate entry for ({date}, {margin})")
        slot[margin] = values
    if not per_date:
        raise FormatError(f"{fpath}: no data rows")
    if ens_size is not None and ens_size != len(header) - 3:
        raise StructuralError(f"{fpath}: rows have {ens_size} members but header declares {len(header) - 3}")

    dates = sorted(per_date)
    margin_ids = tuple(per_date[dates[0]])
    for date in dates:
        if set(per_date[date]) != set(margin_ids):
            raise StructuralError(f"{fpath}: margins on {date} differ from margins on {dates[0]}")
    forecasts = np.array([[per_date[date][m] for m in margin_ids] for date in dates])
    forecasts = forecasts.transpose(0, 2, 1)

    opath, oheader, orows = _read_rows(observation_path)
    if oheader != ["date", "station", "variable", "value"]:
        raise FormatError(f"{opath}: header must be date,station,variable,value")
    index = {date: i for i, date in enumerate(dates)}
    col = {m: j for j, m in enumerate(margin_ids)}
    observations = np.full((len(dates), len(margin_ids)), np.nan)
    seen = set()
    for lineno, row in orows:
        if len(row) != 4:
            raise FormatError(f"{opath}:{lineno}: expected 4 columns, got {len(row)}")
        date = _parse_date(row[0].strip(), opath, lineno)
        try:
            margin = MarginId(row[1].strip(), row[2].strip())
        except ValueError as exc:
            raise FormatError(f"{opath}:{lineno}: column 'variable': {exc}") from None
        value = _parse_value(row[3].strip(), opath, lineno, "value", allow_missing=True)
        if (date, margin) in seen:
            raise StructuralError(f"{opath}:{lineno}: duplicate entry for ({date}, {margin})")
        seen.add((date, margin))
        if date not in index:
            raise StructuralError(f"{opath}:{lineno}: observation date {date} has no forecast")
        if margin not in col:
            raise StructuralError(f"{opath}:{lineno}: unknown margin {margin}")
        observations[index[date], col[margin]] = value
    return Archive(tuple(dates), forecasts, observations, margin_ids)


def _fmt(value: float) -> str:
    return MISSING_TOKEN if not math.isfinite(value) else repr(float(value))


def write_archive(archive: Archive, forecast_path, observation_path) -> None:
    M = archive.ensemble_size
    with Path(forecast_path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "station", "variable"] + [f"member_{k + 1}" for k in range(M)])
        for i, date in enumerate(archive.dates):
            for j, margin in enumerate(archive.margin_ids):
                writer.writerow(
                    [date.isoformat(), margin.station, margin.variable]
                    + [_fmt(v) for v in archive.forecasts[i, :, j]]
                )
    write_observations(archive.dates, archive.observations, archive.margin_ids, observation_path)


def write_observations(dates, values, margin_ids, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "station", "variable", "value"])
        for i, date in enumerate(dates):
            for j, margin in enumerate(margin_ids):
                writer.writerow([date.isoformat(), margin.station, margin.variable, _fmt(values[i, j])])


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

AR_COEFFICIENT = 0.7
ANOMALY_SD = 3.0
NOISE_SD = 1.5
NOISE_LOG_SD = 0.25


@dataclass(frozen=True)
class SyntheticConfig:
    """Settings of the synthetic multi-station archive.

    ``cross_correlation`` is the constant correlation between all margins of
    both the weather anomalies and the forecast-unpredictable noise.
    """

    n_stations: int = 3
    n_variables: int = 1
    n_days: int = 730
    M: int = 17
    seed: int = 0
    bias: float = 1.0
    spread_deficit: float = 0.5
    cross_correlation: float = 0.6
    seasonal_amplitude: float = 8.0
    start: dt.date = dt.date(2014, 1, 1)

    def __post_init__(self):
        if not 0 < self.spread_deficit <= 1:
            raise ValueError("spread_deficit must lie in (0, 1]")
        if not abs(self.cross_correlation) < 1:
            raise ValueError("|cross_correlation| must be < 1")
        if self.n_days < 90:
            raise ValueError("n_days must be at least 90")
        if self.n_stations < 1 or self.n_variables not in (1, 2) or self.M < 2:
            raise ValueError("need n_stations >= 1, n_variables in {1, 2} and M >= 2")

    @property
    def d(self) -> int:
        return self.n_stations * self.n_variables

    def margin_ids(self) -> tuple:
        return tuple(
            MarginId(f"S{j + 1:02d}", VARIABLES[k])
            for j in range(self.n_stations)
            for k in range(self.n_variables)
        )


def seasonal_cycle(config: SyntheticConfig, dates) -> np.ndarray:
    """Climatological mean, shape ``(len(dates), d)``."""
    doy = np.array([day_of_year(day) for day in dates], dtype=float)
    base = np.array(
        [8.0 - 2.0 * j - 4.0 * k for j in range(config.n_stations) for k in range(config.n_variables)]
    )
    wave = config.seasonal_amplitude * np.sin(2 * np.pi * (doy - 105.0) / 365.0)
    return base[None, :] + wave[:, None]


def _generate(config: SyntheticConfig):
    d, T, M = config.d, config.n_days, config.M
    rng = np.random.default_rng(config.seed)
    corr = np.full((d, d), config.cross_correlation)
    np.fill_diagonal(corr, 1.0)
    chol = np.linalg.cholesky(corr)

    # draw order is fixed so that configs differing only in bias, spread or
    # amplitude share the same underlying random numbers
    innovations = rng.standard_normal((T, d)) @ chol.T
    log_scale = rng.standard_normal(T)
    obs_noise = rng.standard_normal((T, d)) @ chol.T
    member_noise = rng.standard_normal((T, M, d)) @ chol.T

    anomaly = np.empty((T, d))
    anomaly[0] = ANOMALY_SD * innovations[0]
    scale = ANOMALY_SD * math.sqrt(1 - AR_COEFFICIENT**2)
    for t in range(1, T):
        anomaly[t] = AR_COEFFICIENT * anomaly[t - 1] + scale * innovations[t]

    dates = tuple(config.start + dt.timedelta(days=t) for t in range(T))
    truth = seasonal_cycle(config, dates) + anomaly
    noise_sd = NOISE_SD * np.exp(NOISE_LOG_SD * log_scale)
    observations = truth + noise_sd[:, None] * obs_noise
    forecasts = (
        truth[:, None, :]
        + config.bias
        + config.spread_deficit * noise_sd[:, None, None] * member_noise
    )
    return dates, forecasts, observations, truth


def generate_synthetic(config: SyntheticConfig) -> Archive:
    """Seeded synthetic archive standing in for a restricted station dataset.

    Each margin follows a seasonal sinusoid plus an AR(1) anomaly
    (coefficient 0.7) whose innovations have constant cross-margin correlation.
    The anomaly is the predictable part, called *truth*. Observations add a
    correlated noise with a day-dependent scale. Ensemble members add
    ``bias`` and a member noise of the same day-dependent scale shrunk by
    ``spread_deficit``. With ``bias=0`` and ``spread_deficit=1`` members and
    observation are exchangeable, so the raw ensemble is calibrated.
    """
    dates, forecasts, observations, _ = _generate(config)
    return Archive(dates, forecasts, observations, config.margin_ids())


def generate_truth(config: SyntheticConfig) -> np.ndarray:
    """The conditional mean of the observations, shape ``(n_days, d)``."""
    return _generate(config)[3]


def write_synthetic(config: SyntheticConfig, out_dir) -> dict:
    """Write ``forecasts.csv``, ``observations.csv`` and ``truth.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dates, forecasts, observations, truth = _generate(config)
    archive = Archive(dates, forecasts, observations, config.margin_ids())
    paths = {
        "forecasts": out_dir / "forecasts.csv",
        "observations": out_dir / "observations.csv",
        "truth": out_dir / "truth.csv",
    }
    write_archive(archive, paths["forecasts"], paths["observations"])
    write_observations(dates, truth, archive.margin_ids, paths["truth"])
    return paths
