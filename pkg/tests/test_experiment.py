import csv
import datetime as dt
import json

import numpy as np
import pytest

from cobase import experiment
from cobase.cli import main
from cobase.datasets import SyntheticConfig, generate_synthetic
from cobase.exceptions import ConfigError, InvariantViolation
from cobase.experiment import RunConfig, config_from_mapping, run_experiment
from cobase.shuffling import METHODS

SMALL = {"n_stations": 2, "n_days": 90, "ensemble_size": 5, "synthetic_seed": 1, "n": 5}


def write_config(tmp_path, **extra):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({**SMALL, **extra}))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def small_run():
    config = config_from_mapping({**SMALL, "base_seed": 3})
    return config, run_experiment(config)


def test_warm_up_and_window(small_run):
    config, table = small_run
    dates = sorted({r[2] for r in table.records})
    start = config.synthetic.start
    assert dates[0] == start + dt.timedelta(days=config.window_days + 1)
    assert len(dates) == config.synthetic.n_days - config.window_days - 1


def test_all_methods_scored(small_run):
    config, table = small_run
    assert table.methods == METHODS
    for method in METHODS:
        assert len(table.series("all", method, "ES")) == 90 - 31
        assert np.isfinite(table.mean_score("all", method, "VS"))
    assert table.audits["leakage_violations"] == 0
    assert table.audits["margin_identity_violations"] == 0
    assert table.audits["margin_identity_checks"] > 0


def test_paired_methods_share_dates(small_run):
    _, table = small_run
    assert table.series("all", "SimSSh", "ES").keys() == table.series("all", "SimSSh-R", "ES").keys()


def test_dm_pairs_are_configured(small_run):
    config, table = small_run
    pairs = {(r[3], r[4]) for r in table.dm_rows()}
    assert pairs == set(config.comparisons)
    kinds = {r[1] for r in table.dm_rows()}
    assert kinds == {"CRPS", "ES", "VS"}


def test_ecc_guard_before_computation():
    with pytest.raises(ConfigError):
        run_experiment(config_from_mapping({**SMALL, "n": 7, "methods": "ECC"}))


def test_unknown_method_and_key():
    with pytest.raises(ConfigError):
        config_from_mapping({**SMALL, "methods": "EMOS-Q,BMA"})
    with pytest.raises(ConfigError):
        config_from_mapping({**SMALL, "lead_time": 24})


def test_station_groups(tmp_path):
    config = config_from_mapping({**SMALL, "n_stations": 3, "methods": "EMOS-Q,COBASE-GCA",
                                  "station_groups": {"west": ["S01:T2m", "S02:T2m"], "east": "S03:T2m"}})
    table = run_experiment(config)
    assert set(table.groups) == {"west", "east"}
    assert {r[0] for r in table.records} == {"west", "east"}
    with pytest.raises(ConfigError):
        run_experiment(config_from_mapping({**SMALL, "station_groups": {"x": ["S09:T2m"]}}))


def test_missing_observation_dates_not_scored():
    base = generate_synthetic(SyntheticConfig(n_stations=2, n_days=90, M=5, seed=1))
    obs = np.array(base.observations)
    obs[50, 1] = np.nan
    archive = type(base)(base.dates, base.forecasts, obs, base.margin_ids)
    config = config_from_mapping({**SMALL, "methods": "EMOS-Q,SSh"})
    table = run_experiment(config, archive)
    assert base.dates[50] not in table.series("all", "SSh", "ES")
    assert len(table.series("all", "SSh", "ES")) == 90 - 31 - 1


def test_margin_audit_fires(monkeypatch):
    real = experiment.postprocess_multivariate

    def broken(method, *args, **kwargs):
        out = real(method, *args, **kwargs)
        return out + 1e-9 if method == "SSh" else out

    monkeypatch.setattr(experiment, "postprocess_multivariate", broken)
    with pytest.raises(InvariantViolation):
        run_experiment(config_from_mapping({**SMALL, "methods": "SSh"}))


def test_leakage_audit_fires(monkeypatch):
    from cobase.shuffling import RankMatrix

    def leaky(method, archive, i, N, seed, model):
        return RankMatrix(np.tile(np.arange(1, N + 1), (archive.d, 1)), source_dates=(archive.dates[i],))

    monkeypatch.setattr(experiment, "_build_reference", leaky)
    with pytest.raises(InvariantViolation):
        run_experiment(config_from_mapping({**SMALL, "methods": "SSh"}))


# --- CLI -------------------------------------------------------------------

def test_cli_generate(tmp_path):
    out = tmp_path / "data"
    assert main(["generate", "--out", str(out), "--config", str(write_config(tmp_path)), "--seed", "4"]) == 0
    assert {p.name for p in out.iterdir()} == {"forecasts.csv", "observations.csv", "truth.csv"}
    rows = read_csv(out / "forecasts.csv")
    assert rows[0] == ["date", "station", "variable"] + [f"member_{k}" for k in range(1, 6)]
    assert len(rows) == 1 + 90 * 2


def test_cli_run_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, methods="EMOS-Q,EMOS-R,SimSSh,COBASE-Frank,Frank")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--out", str(a), "--config", str(cfg), "--seed", "9"]) == 0
    assert main(["run", "--out", str(b), "--config", str(cfg), "--seed", "9"]) == 0
    for name in ("scores.csv", "dm.csv", "per_date.csv", "manifest.json", "run_log.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    dm = read_csv(a / "dm.csv")
    assert dm[0] == ["group", "score_kind", "margin", "method", "baseline", "dm_statistic", "n_dates", "degenerate"]
    assert {(r[3], r[4]) for r in dm[1:]} == {("EMOS-Q", "EMOS-R"), ("COBASE-Frank", "Frank")}
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["base_seed"] == 9 and manifest["audits"]["leakage_violations"] == 0


def test_cli_seed_changes_results(tmp_path):
    cfg = write_config(tmp_path, methods="EMOS-R")
    main(["run", "--out", str(tmp_path / "a"), "--config", str(cfg), "--seed", "1"])
    main(["run", "--out", str(tmp_path / "b"), "--config", str(cfg), "--seed", "2"])
    assert (tmp_path / "a" / "scores.csv").read_bytes() != (tmp_path / "b" / "scores.csv").read_bytes()


def test_cli_scores_reaggregates(tmp_path):
    cfg = write_config(tmp_path, methods="EMOS-Q,EMOS-R")
    out = tmp_path / "run"
    main(["run", "--out", str(out), "--config", str(cfg)])
    scores, dm = (out / "scores.csv").read_bytes(), (out / "dm.csv").read_bytes()
    (out / "scores.csv").unlink()
    assert main(["scores", "--out", str(out)]) == 0
    assert (out / "scores.csv").read_bytes() == scores
    assert (out / "dm.csv").read_bytes() == dm


def test_cli_empty_method_list(tmp_path):
    out = tmp_path / "empty"
    assert main(["run", "--out", str(out), "--config", str(write_config(tmp_path)), "--methods", ""]) == 0
    assert read_csv(out / "scores.csv") == [["group", "method", "margin", "crps", "es", "vs"]]


def test_cli_run_from_archive_files(tmp_path):
    data = tmp_path / "data"
    main(["generate", "--out", str(data), "--config", str(write_config(tmp_path))])
    cfg = tmp_path / "files.json"
    cfg.write_text(json.dumps({"forecasts": "data/forecasts.csv", "observations": "data/observations.csv",
                               "methods": "EMOS-Q,ECC", "n": 5}))
    assert main(["run", "--out", str(tmp_path / "out"), "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out" / "scores.csv")
    assert {r[1] for r in rows[1:]} == {"EMOS-Q", "ECC"}


def test_cli_exit_codes(tmp_path, monkeypatch):
    out = str(tmp_path / "o")
    assert main(["run", "--out", out, "--config", str(write_config(tmp_path, colour="red"))]) == 2
    assert main(["run", "--out", out, "--config", str(write_config(tmp_path)), "--methods", "ECC", "--n", "9"]) == 2
    assert main(["run", "--out", out, "--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"forecasts": "missing.csv", "observations": "missing_obs.csv"}))
    assert main(["run", "--out", out, "--config", str(bad)]) == 3
    (tmp_path / "f.csv").write_text("date,station,variable,member_1,member_2\n2020-01-01,S1,T2m,1,oops\n")
    (tmp_path / "obs.csv").write_text("date,station,variable,value\n")
    bad.write_text(json.dumps({"forecasts": "f.csv", "observations": "obs.csv"}))
    assert main(["run", "--out", out, "--config", str(bad)]) == 3
    monkeypatch.setattr(experiment, "postprocess_multivariate", lambda *a, **k: np.zeros((2, 5)))
    assert main(["run", "--out", out, "--config", str(write_config(tmp_path, methods="SSh"))]) == 4
    assert main(["scores", "--out", str(tmp_path / "never")]) == 3
