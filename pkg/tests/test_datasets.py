import datetime as dt

import numpy as np
import pytest
from scipy.stats import chisquare

from cobase.datasets import (
    Archive,
    MarginId,
    SyntheticConfig,
    day_of_year,
    doy_distance,
    generate_synthetic,
    generate_truth,
    load_archive,
    write_archive,
    write_synthetic,
)
from cobase.exceptions import FormatError, StructuralError

FORECASTS = """date,station,variable,member_1,member_2,member_3
2020-01-01,S01,T2m,1.0,2.0,3.0
2020-01-01,S02,DPT,-1.0,-2.0,-3.5
2020-01-02,S01,T2m,1.5,2.5,3.5
2020-01-02,S02,DPT,0.0,0.25,0.5
"""
OBSERVATIONS = """date,station,variable,value
2020-01-01,S01,T2m,2.2
2020-01-01,S02,DPT,NA
2020-01-02,S01,T2m,2.9
2020-01-02,S02,DPT,0.1
"""


def write_pair(tmp_path, forecasts=FORECASTS, observations=OBSERVATIONS):
    f, o = tmp_path / "forecasts.csv", tmp_path / "observations.csv"
    f.write_text(forecasts)
    o.write_text(observations)
    return f, o


def test_load_small_pair(tmp_path):
    archive = load_archive(*write_pair(tmp_path))
    assert archive.d == 2 and archive.ensemble_size == 3 and len(archive) == 2
    assert archive.margin_ids == (MarginId("S01", "T2m"), MarginId("S02", "DPT"))
    np.testing.assert_array_equal(archive.forecast_case(1).members[:, 1], [0.0, 0.25, 0.5])
    assert np.isnan(archive.observations[0, 1])
    assert not archive.observation(0).complete and archive.observation(1).complete
    assert archive.complete_mask().tolist() == [False, True]


def test_round_trip(tmp_path, small_archive):
    f, o = tmp_path / "f.csv", tmp_path / "o.csv"
    write_archive(small_archive, f, o)
    assert load_archive(f, o).equals(small_archive, atol=1e-9)


def test_round_trip_keeps_missing(tmp_path):
    archive = load_archive(*write_pair(tmp_path))
    f, o = tmp_path / "f2.csv", tmp_path / "o2.csv"
    write_archive(archive, f, o)
    assert load_archive(f, o).equals(archive)


def test_inconsistent_member_count(tmp_path):
    bad = FORECASTS.replace("1.5,2.5,3.5", "1.5,2.5,3.5,4.5")
    with pytest.raises(StructuralError):
        load_archive(*write_pair(tmp_path, forecasts=bad))


def test_duplicate_key(tmp_path):
    bad = FORECASTS + "2020-01-02,S01,T2m,1.0,1.0,1.0\n"
    with pytest.raises(StructuralError):
        load_archive(*write_pair(tmp_path, forecasts=bad))


def test_bad_value_names_row_and_column(tmp_path):
    bad = FORECASTS.replace("2.5", "warm")
    with pytest.raises(FormatError, match=r":4: column 'member_2'"):
        load_archive(*write_pair(tmp_path, forecasts=bad))
    with pytest.raises(FormatError, match="value"):
        load_archive(*write_pair(tmp_path, observations=OBSERVATIONS.replace("2.9", "x")))


def test_observation_without_forecast(tmp_path):
    with pytest.raises(StructuralError):
        load_archive(*write_pair(tmp_path, observations=OBSERVATIONS + "2020-01-03,S01,T2m,1.0\n"))


def test_archive_rejects_unsorted_dates():
    d = [dt.date(2020, 1, 2), dt.date(2020, 1, 1)]
    with pytest.raises(StructuralError):
        Archive(d, np.zeros((2, 2, 1)), np.zeros((2, 1)), (MarginId("A"),))


def test_margin_id_parse():
    assert MarginId.parse("S03:DPT") == MarginId("S03", "DPT")
    assert str(MarginId("S03", "DPT")) == "S03:DPT"
    with pytest.raises(ValueError):
        MarginId("S01", "RH")


def test_day_of_year():
    assert day_of_year(dt.date(2020, 12, 31)) == 365
    assert day_of_year(dt.date(2021, 12, 31)) == 365
    assert doy_distance(360, 5) == 10
    assert doy_distance(100, 120) == 20


def test_synthetic_deterministic():
    cfg = SyntheticConfig(n_stations=2, n_days=100, seed=4)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    np.testing.assert_array_equal(a.forecasts, b.forecasts)
    np.testing.assert_array_equal(a.observations, b.observations)
    assert a.dates == b.dates
    assert not np.array_equal(generate_synthetic(SyntheticConfig(n_stations=2, n_days=100, seed=5)).forecasts, a.forecasts)


def test_synthetic_config_invariants():
    for kwargs in ({"spread_deficit": 0.0}, {"spread_deficit": 1.5}, {"cross_correlation": 1.0}, {"n_days": 60}):
        with pytest.raises(ValueError):
            SyntheticConfig(**kwargs)


def test_synthetic_calibrated_rank_histogram():
    cfg = SyntheticConfig(n_stations=1, n_days=3000, M=9, bias=0.0, spread_deficit=1.0, cross_correlation=0.0, seed=1)
    archive = generate_synthetic(cfg)
    ranks = np.sum(archive.forecasts[:, :, 0] < archive.observations[:, [0]], axis=1)
    counts = np.bincount(ranks, minlength=cfg.M + 1)
    assert chisquare(counts).pvalue > 0.001


def test_synthetic_biased_underdispersive():
    archive = generate_synthetic(SyntheticConfig(n_days=1000, seed=2))
    ranks = np.sum(archive.forecasts[:, :, 0] < archive.observations[:, [0]], axis=1)
    counts = np.bincount(ranks, minlength=18)
    assert counts[0] > 3 * counts[9]
    assert np.mean(archive.forecasts.mean(axis=1) - archive.observations) == pytest.approx(1.0, abs=0.2)


def test_synthetic_cross_correlation():
    cfg = SyntheticConfig(n_stations=2, n_days=2000, cross_correlation=0.8, seasonal_amplitude=0.0, seed=3)
    obs = generate_synthetic(cfg).observations
    assert 0.75 <= np.corrcoef(obs.T)[0, 1] <= 0.85


def test_spread_scales_linearly():
    spreads = []
    for k in (0.25, 0.5, 1.0):
        f = generate_synthetic(SyntheticConfig(n_days=365, spread_deficit=k, seed=6)).forecasts
        spreads.append(f.std(axis=1, ddof=1).mean())
    slope = np.polyfit([0.25, 0.5, 1.0], spreads, 1)
    fitted = np.polyval(slope, [0.25, 0.5, 1.0])
    assert np.all(np.abs(fitted - spreads) <= 0.05 * np.asarray(spreads))
    assert abs(slope[1]) <= 0.05 * slope[0]


def test_write_synthetic(tmp_path):
    cfg = SyntheticConfig(n_stations=2, n_variables=2, n_days=90, M=5, seed=1)
    paths = write_synthetic(cfg, tmp_path)
    assert {p.name for p in paths.values()} == {"forecasts.csv", "observations.csv", "truth.csv"}
    archive = load_archive(paths["forecasts"], paths["observations"])
    assert archive.equals(generate_synthetic(cfg))
    truth = load_archive(paths["forecasts"], paths["truth"]).observations
    np.testing.assert_allclose(truth, generate_truth(cfg), atol=1e-12)
    assert [str(m) for m in archive.margin_ids] == ["S01:T2m", "S01:DPT", "S02:T2m", "S02:DPT"]
