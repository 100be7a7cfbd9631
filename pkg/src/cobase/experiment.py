"""Rolling-window train/predict/score harness.

For every verification date after the warm-up period the harness

1. fits EMOS per margin on the ``window_days`` calendar days before the date,
2. fits the needed copulas on the observations of the same window,
3. builds each configured method's ``d x N`` forecast per station group,
4. scores CRPS per margin, the energy score and the variogram score.

Two audits run inside the loop and abort the run on failure: every shuffling
method must keep the quantile margins bit for bit, and no reference structure
or training window may read the verification date's observation.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import Archive, MarginId, SyntheticConfig, generate_synthetic, load_archive
from .emos import EmosCoefficients, fit_emos, predict_margin
from .exceptions import ConfigError, InsufficientDataError, InvariantViolation
from .sampling import uniform_quantiles
from .scoring import crps_ensemble, dm_statistic, energy_score, variogram_score
from .shuffling import (
    COBASE_METHODS,
    METHODS,
    SHUFFLING_METHODS,
    canonical_method,
    cobase_reference,
    ecc_reference,
    fit_window_copula,
    method_family,
    postprocess_multivariate,
    schaake_reference,
    simschaake_reference,
    split_seed,
)

logger = logging.getLogger(__name__)

DM_ORIENTATION = "positive dm_statistic: method has a higher (worse) mean score than baseline"
MULTIVARIATE = ""

# methods sharing a key use the same per-date random numbers
_STRUCTURE = {
    "EMOS-R": "EMOS", "EMOS-Q": "EMOS", "SimSSh-R": "SimSSh", "SimSSh": "SimSSh",
    "SSh": "SSh", "ECC": "ECC",
    "GCA": "Gaussian", "COBASE-GCA": "Gaussian",
    "Clayton": "Clayton", "COBASE-Clayton": "Clayton",
    "Frank": "Frank", "COBASE-Frank": "Frank",
    "Gumbel": "Gumbel", "COBASE-Gumbel": "Gumbel",
}
_STRUCTURE_KEYS = {name: k for k, name in enumerate(dict.fromkeys(_STRUCTURE.values()))}
_FIT_KEY = len(_STRUCTURE_KEYS)

DEFAULT_COMPARISONS = (
    ("EMOS-Q", "EMOS-R"),
    ("SimSSh", "SimSSh-R"),
    ("SSh", "COBASE-GCA"),
    ("SimSSh", "COBASE-GCA"),
    ("ECC", "COBASE-GCA"),
    ("GCA", "COBASE-GCA"),
    ("COBASE-GCA", "GCA"),
    ("COBASE-Clayton", "Clayton"),
    ("COBASE-Frank", "Frank"),
    ("COBASE-Gumbel", "Gumbel"),
)


@dataclass
class RunConfig:
    """Experiment settings.

    Either ``forecasts``/``observations`` paths or a ``synthetic`` config
    must be given. ``station_groups`` maps a group name to its margins; by
    default all margins form one group named ``all``. ``comparisons`` lists
    ``(method, baseline)`` pairs for the DM statistics; by default the pairs
    of :data:`DEFAULT_COMPARISONS` whose two methods are both configured.
    """

    methods: tuple = METHODS
    N: int = 17
    window_days: int = 30
    vs_p: float = 1.0
    base_seed: int = 0
    forecasts: str | None = None
    observations: str | None = None
    synthetic: SyntheticConfig | None = None
    station_groups: dict | None = None
    comparisons: tuple | None = None

    def __post_init__(self):
        self.methods = tuple(canonical_method(m) for m in self.methods)
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods contain duplicates")
        if self.N < 1 or self.window_days < 1 or not self.vs_p > 0:
            raise ConfigError("N and window_days must be positive, vs_p > 0")
        if (self.forecasts is None) != (self.observations is None):
            raise ConfigError("forecasts and observations paths go together")
        if self.forecasts is None and self.synthetic is None:
            raise ConfigError("give archive paths or a synthetic config")
        if self.comparisons is None:
            self.comparisons = tuple(
                (m, b) for m, b in DEFAULT_COMPARISONS if m in self.methods and b in self.methods
            )
        else:
            pairs = []
            for method, baseline in self.comparisons:
                method, baseline = canonical_method(method), canonical_method(baseline)
                if method not in self.methods or baseline not in self.methods:
                    raise ConfigError(f"comparison {method} vs {baseline} uses an unconfigured method")
                pairs.append((method, baseline))
            self.comparisons = tuple(pairs)
        if self.station_groups is not None:
            self.station_groups = {
                name: tuple(m if isinstance(m, MarginId) else MarginId.parse(m) for m in margins)
                for name, margins in self.station_groups.items()
            }

    def ensemble_size(self):
        return self.synthetic.M if self.synthetic is not None else None

    def validate_against(self, archive: Archive):
        if "ECC" in self.methods and self.N != archive.ensemble_size:
            raise ConfigError(f"ECC needs N == M: N={self.N}, M={archive.ensemble_size}")
        for name, margins in self.groups(archive).items():
            missing = [str(m) for m in margins if m not in archive.margin_ids]
            if missing:
                raise ConfigError(f"group {name!r} has unknown margins {missing}")

    def groups(self, archive: Archive) -> dict:
        return self.station_groups or {"all": archive.margin_ids}

    def to_dict(self) -> dict:
        out = {
            "methods": list(self.methods),
            "n": self.N,
            "window_days": self.window_days,
            "vs_p": self.vs_p,
            "base_seed": self.base_seed,
            "forecasts": self.forecasts,
            "observations": self.observations,
            "comparisons": [f"{m} vs {b}" for m, b in self.comparisons],
        }
        if self.synthetic is not None:
            syn = asdict(self.synthetic)
            syn["start"] = self.synthetic.start.isoformat()
            out["synthetic"] = syn
        if self.station_groups is not None:
            out["station_groups"] = {k: [str(m) for m in v] for k, v in self.station_groups.items()}
        return out


@dataclass
class ResultTable:
    """Per-date score records plus their aggregates.

    ``records`` holds ``(group, method, date, margin, kind, value)`` tuples;
    ``margin`` is empty for the multivariate ES and VS.
    """

    records: list
    groups: dict
    methods: tuple
    comparisons: tuple
    log: list = field(default_factory=list)
    audits: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    def series(self, group, method, kind, margin=MULTIVARIATE) -> dict:
        return {
            date: value
            for g, m, date, mg, k, value in self.records
            if g == group and m == method and k == kind and mg == margin
        }

    def score_rows(self) -> list:
        """Rows ``(group, method, margin, crps, es, vs)`` of mean scores."""
        sums = defaultdict(list)
        for g, m, _, mg, k, v in self.records:
            sums[(g, m, mg, k)].append(v)
        means = {key: math.fsum(vals) / len(vals) for key, vals in sums.items()}
        rows = []
        for group, margins in self.groups.items():
            for method in self.methods:
                crps = [means.get((group, method, str(mg), "CRPS")) for mg in margins]
                for mg, value in zip(margins, crps):
                    rows.append((group, method, str(mg), value, None, None))
                valid = [c for c in crps if c is not None]
                rows.append((
                    group, method, MULTIVARIATE,
                    math.fsum(valid) / len(valid) if valid else None,
                    means.get((group, method, MULTIVARIATE, "ES")),
                    means.get((group, method, MULTIVARIATE, "VS")),
                ))
        return rows

    def mean_score(self, group, method, kind, margin=MULTIVARIATE):
        values = list(self.series(group, method, kind, margin).values())
        return math.fsum(values) / len(values) if values else math.nan

    def dm_rows(self) -> list:
        """Rows ``(group, kind, margin, method, baseline, dm, n_dates)``."""
        index = defaultdict(dict)
        for g, m, date, mg, k, v in self.records:
            index[(g, m, mg, k)][date] = v
        rows = []
        for group, margins in self.groups.items():
            targets = [("CRPS", str(mg)) for mg in margins] + [("ES", MULTIVARIATE), ("VS", MULTIVARIATE)]
            for method, baseline in self.comparisons:
                for kind, margin in targets:
                    a = index.get((group, method, margin, kind), {})
                    b = index.get((group, baseline, margin, kind), {})
                    common = sorted(set(a) & set(b))
                    if len(common) < 2:
                        stat = math.nan
                    else:
                        stat = dm_statistic(np.array([a[t] for t in common]), np.array([b[t] for t in common]))
                    rows.append((group, kind, margin, method, baseline, stat, len(common)))
        return rows


def _derived_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint64)[0])


def resolve_archive(config: RunConfig) -> Archive:
    if config.forecasts is not None:
        return load_archive(config.forecasts, config.observations)
    return generate_synthetic(config.synthetic)


def run_experiment(config: RunConfig, archive: Archive | None = None) -> ResultTable:
    """Run every configured method over the archive and score it.

    Raises
    ------
    ConfigError
        Inconsistent configuration (for instance ECC with ``N != M``).
    InvariantViolation
        A margin-identity or leakage audit failed.
    """
    if archive is None:
        archive = resolve_archive(config)
    config.validate_against(archive)
    groups = config.groups(archive)
    group_archives = {name: archive.select_margins(margins) for name, margins in groups.items()}
    group_cols = {name: [archive.margin_ids.index(m) for m in margins] for name, margins in groups.items()}

    log: list[str] = []
    audits = {"margin_identity_checks": 0, "margin_identity_violations": 0,
              "leakage_checks": 0, "leakage_violations": 0}
    skipped: dict[str, int] = defaultdict(int)
    records = []
    table = ResultTable(records, groups, config.methods, config.comparisons, log, audits, skipped)
    if not config.methods:
        return table

    dates = archive.dates
    ordinals = np.array([day.toordinal() for day in dates])
    ens_mean = archive.forecasts.mean(axis=1)
    ens_var = archive.forecasts.var(axis=1, ddof=1)
    obs = archive.observations
    first_scored = dates[0] + dt.timedelta(days=config.window_days + 1)
    families = sorted({method_family(m) for m in config.methods} - {None}, key=lambda f: f.value)
    last_coeffs: dict[int, EmosCoefficients] = {}

    for i, date in enumerate(dates):
        if date < first_scored:
            continue
        lo = np.searchsorted(ordinals, ordinals[i] - config.window_days)
        window = np.arange(lo, i)
        if window.size and ordinals[window[-1]] >= ordinals[i]:
            raise InvariantViolation(f"training window for {date} reaches the verification date")

        coeffs = []
        for l in range(archive.d):
            try:
                c = fit_emos(ens_mean[window, l], ens_var[window, l], obs[window, l])
                if not c.converged:
                    log.append(f"{date} {archive.margin_ids[l]}: EMOS did not converge, best iterate used")
                last_coeffs[l] = c
            except InsufficientDataError:
                c = last_coeffs.get(l)
                log.append(
                    f"{date} {archive.margin_ids[l]}: EMOS window too small, "
                    + ("reusing previous coefficients" if c else "no previous fit, date skipped")
                )
            coeffs.append(c)
        if any(c is None for c in coeffs):
            skipped["<all methods>"] += 1
            continue
        margins_all = [predict_margin(c, ens_mean[i, l], ens_var[i, l]) for l, c in enumerate(coeffs)]

        for g_index, (group, g_archive) in enumerate(group_archives.items()):
            cols = group_cols[group]
            margins = [margins_all[l] for l in cols]
            y = obs[i, cols]
            scorable = bool(np.all(np.isfinite(y)))
            quantiles = np.vstack([uniform_quantiles(m, config.N).values for m in margins])
            fit_seed = _derived_seed(config.base_seed, i, g_index, _FIT_KEY)
            models = {}
            for family in families:
                try:
                    models[family] = fit_window_copula(g_archive, date, family, config.window_days, fit_seed)
                except InsufficientDataError as exc:
                    log.append(f"{date} {group}: {family.value} copula not fitted ({exc})")
                    continue
                if models[family].clamped:
                    log.append(f"{date} {group}: {family.value} parameter clamped to {models[family].theta}")

            for method in config.methods:
                seed = _derived_seed(config.base_seed, i, g_index, _STRUCTURE_KEYS[_STRUCTURE[method]])
                family = method_family(method)
                if family is not None and family not in models:
                    skipped[method] += 1
                    continue
                try:
                    reference = _build_reference(method, g_archive, i, config.N, seed, models.get(family))
                except InsufficientDataError as exc:
                    log.append(f"{date} {group} {method}: skipped ({exc})")
                    skipped[method] += 1
                    continue
                if reference is not None:
                    audits["leakage_checks"] += 1
                    if date in reference.source_dates:
                        audits["leakage_violations"] += 1
                        raise InvariantViolation(f"{method} reference for {date} read the verification date")
                forecast = postprocess_multivariate(
                    method, g_archive, date, margins, config.N, seed,
                    copula=models.get(family), window_days=config.window_days, reference=reference,
                )
                if method in SHUFFLING_METHODS:
                    audits["margin_identity_checks"] += 1
                    if not np.array_equal(np.sort(forecast, axis=1), quantiles):
                        audits["margin_identity_violations"] += 1
                        raise InvariantViolation(f"{method} on {date} altered the quantile margins")
                if not scorable:
                    continue
                for k, margin_id in enumerate(groups[group]):
                    records.append((group, method, date, str(margin_id), "CRPS", crps_ensemble(forecast[k], y[k])))
                records.append((group, method, date, MULTIVARIATE, "ES", energy_score(forecast.T, y)))
                records.append((group, method, date, MULTIVARIATE, "VS", variogram_score(forecast.T, y, config.vs_p)))
    return table


def _build_reference(method, archive, i, N, seed, model):
    _, ref_seed = split_seed(seed)
    if method == "ECC":
        return ecc_reference(archive.forecast_case(i), ref_seed)
    if method == "SSh":
        return schaake_reference(archive, archive.dates[i], N, ref_seed)
    if method in ("SimSSh", "SimSSh-R"):
        return simschaake_reference(archive, archive.forecast_case(i), N, ref_seed)
    if method in COBASE_METHODS:
        return cobase_reference(model, N, ref_seed)
    return None


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.10f}"


def _write_csv(path: Path, header, rows):
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_scores(table: ResultTable, out_dir) -> None:
    out_dir = Path(out_dir)
    _write_csv(
        out_dir / "scores.csv",
        ["group", "method", "margin", "crps", "es", "vs"],
        [(g, m, mg, _fmt(c), _fmt(e), _fmt(v)) for g, m, mg, c, e, v in table.score_rows()],
    )
    _write_csv(
        out_dir / "dm.csv",
        ["group", "score_kind", "margin", "method", "baseline", "dm_statistic", "n_dates", "degenerate"],
        [
            (g, k, mg, m, b, _fmt(s), n, int(math.isinf(s)))
            for g, k, mg, m, b, s, n in table.dm_rows()
        ],
    )


def emit_outputs(table: ResultTable, out_dir, config: RunConfig | None = None) -> dict:
    """Write ``scores.csv``, ``dm.csv``, ``per_date.csv``, ``run_log.txt`` and ``manifest.json``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    write_scores(table, out_dir)
    _write_csv(
        out_dir / "per_date.csv",
        ["group", "method", "date", "margin", "score_kind", "value"],
        [(g, m, d.isoformat(), mg, k, repr(float(v))) for g, m, d, mg, k, v in table.records],
    )
    lines = list(table.log)
    lines += [f"skipped {method}: {count} date(s)" for method, count in sorted(table.skipped.items())]
    lines += [f"audit {name}: {count}" for name, count in table.audits.items()]
    (out_dir / "run_log.txt").write_text("\n".join(lines) + "\n")
    manifest = {
        "version": __version__,
        "config": config.to_dict() if config is not None else None,
        "base_seed": config.base_seed if config is not None else None,
        "groups": {k: [str(m) for m in v] for k, v in table.groups.items()},
        "methods": list(table.methods),
        "comparisons": [[m, b] for m, b in table.comparisons],
        "dm_orientation": DM_ORIENTATION,
        "dm_variance": "lag-0 sample variance, no autocorrelation correction",
        "audits": table.audits,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {name: out_dir / name for name in
            ("scores.csv", "dm.csv", "per_date.csv", "run_log.txt", "manifest.json")}


def load_results(out_dir) -> ResultTable:
    """Rebuild a :class:`ResultTable` from ``per_date.csv`` and ``manifest.json``."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / "manifest.json").read_text())
    records = []
    with (out_dir / "per_date.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            records.append((
                row["group"], row["method"], dt.date.fromisoformat(row["date"]),
                row["margin"], row["score_kind"], float(row["value"]),
            ))
    groups = {k: tuple(MarginId.parse(m) for m in v) for k, v in manifest["groups"].items()}
    return ResultTable(
        records, groups, tuple(manifest["methods"]),
        tuple(tuple(pair) for pair in manifest["comparisons"]), audits=manifest.get("audits", {}),
    )


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

_SYNTHETIC_KEYS = {
    "n_stations": ("n_stations", int),
    "n_variables": ("n_variables", int),
    "n_days": ("n_days", int),
    "ensemble_size": ("M", int),
    "synthetic_seed": ("seed", int),
    "bias": ("bias", float),
    "spread_deficit": ("spread_deficit", float),
    "cross_correlation": ("cross_correlation", float),
    "seasonal_amplitude": ("seasonal_amplitude", float),
    "start_date": ("start", dt.date.fromisoformat),
}
_RUN_KEYS = {"methods", "n", "window_days", "vs_p", "base_seed", "forecasts", "observations",
             "station_groups", "comparisons"}


def _as_list(value):
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return list(value)


def config_from_mapping(data: dict, base_dir=None, **overrides) -> RunConfig:
    """Build a :class:`RunConfig` from a flat key-value mapping.

    Unknown keys raise :class:`ConfigError`. Synthetic-archive keys are
    ``n_stations``, ``n_variables``, ``n_days``, ``ensemble_size``,
    ``synthetic_seed``, ``bias``, ``spread_deficit``, ``cross_correlation``,
    ``seasonal_amplitude`` and ``start_date``.
    """
    data = dict(data)
    data.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(data) - _RUN_KEYS - set(_SYNTHETIC_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        syn = {_SYNTHETIC_KEYS[k][0]: _SYNTHETIC_KEYS[k][1](v) for k, v in data.items() if k in _SYNTHETIC_KEYS}
        synthetic = SyntheticConfig(**syn) if syn or "forecasts" not in data else None
        paths = {}
        for key in ("forecasts", "observations"):
            if key in data:
                path = Path(data[key])
                paths[key] = str(path if base_dir is None or path.is_absolute() else Path(base_dir) / path)
        comparisons = None
        if "comparisons" in data:
            comparisons = []
            for item in _as_list(data["comparisons"]):
                if isinstance(item, str):
                    method, sep, baseline = item.partition(" vs ")
                    if not sep:
                        raise ConfigError(f"comparison {item!r} must read 'METHOD vs BASELINE'")
                    comparisons.append((method.strip(), baseline.strip()))
                else:
                    comparisons.append(tuple(item))
        return RunConfig(
            methods=tuple(_as_list(data.get("methods", METHODS))),
            N=int(data.get("n", 17)),
            window_days=int(data.get("window_days", 30)),
            vs_p=float(data.get("vs_p", 1.0)),
            base_seed=int(data.get("base_seed", 0)),
            synthetic=synthetic if "forecasts" not in data else None,
            station_groups={k: _as_list(v) for k, v in data["station_groups"].items()}
            if "station_groups" in data else None,
            comparisons=comparisons,
            **paths,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat JSON object")
    return config_from_mapping(data, base_dir=path.parent, **overrides)


__all__ = [
    "DEFAULT_COMPARISONS",
    "ResultTable",
    "RunConfig",
    "config_from_mapping",
    "emit_outputs",
    "load_config",
    "load_results",
    "run_experiment",
    "write_scores",
]
