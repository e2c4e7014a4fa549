import json
import shutil

import pytest

from conftest import write_planted_run
from volts.cli import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, main
from volts.config import RunConfig, check, from_dict, load_config
from volts.errors import ConfigError
from volts.pipeline import STAGES


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def outputs(directory):
    """Every artifact under ``directory`` except the manifest, as bytes."""
    return {str(p.relative_to(directory)): p.read_bytes()
            for p in sorted(directory.rglob("*")) if p.is_file() and p.name != "manifest.json"}


# --- config ----------------------------------------------------------------------

def test_defaults_pass_and_cover_lags_2_to_30():
    cfg = RunConfig()
    assert check(cfg) == []
    assert list(cfg.lags) == list(range(2, 31))
    assert (cfg.clustering.k, cfg.granger.threshold, cfg.backtest.budget, cfg.backtest.commission) == (3, 0.025, 1000.0, 9.0)


def test_cluster_k_zero_message():
    cfg = from_dict({"clustering": {"k": 0}})
    assert "cluster K must be ≥ 1" in check(cfg)


def test_all_violations_listed_at_once():
    cfg = from_dict({
        "tickers": [],
        "clustering": {"k": 0},
        "granger": {"lag_min": 9, "lag_max": 3},
        "backtest": {"budget": 0},
        "windows": {"analysis": {"start": "2022-01-01", "end": "2021-01-01"}},
    })
    problems = check(cfg)
    assert len(problems) >= 5
    assert "ticker list is empty" in problems


def test_unknown_key_and_bad_date_rejected():
    with pytest.raises(ConfigError) as info:
        from_dict({"granger": {"lags": 5}, "windows": {"backtest": {"start": "yesterday"}}})
    text = " ".join(info.value.problems)
    assert "unknown key 'lags'" in text and "not an ISO date" in text


def test_relative_paths_resolve_beside_config(tmp_path):
    (tmp_path / "run.yaml").write_text("data_dir: d\noutput_dir: o\n", encoding="utf-8")
    cfg = load_config(tmp_path / "run.yaml")
    assert cfg.data_dir == tmp_path / "d" and cfg.output_dir == tmp_path / "o"


def test_digest_tracks_content():
    assert RunConfig().digest() == RunConfig().digest()
    assert RunConfig().digest() != from_dict({"volatility": {"window": 10}}).digest()


# --- validate -----------------------------------------------------------------------

def test_validate_ok(capsys, planted_run):
    code, out, _ = run_cli(capsys, "validate", "--config", str(planted_run))
    assert code == EXIT_OK and "config OK" in out


def test_validate_k_zero_exit_1(capsys, tmp_path):
    cfg = write_planted_run(tmp_path, extra="clustering: {k: 0}\n")
    code, _, err = run_cli(capsys, "validate", "--config", str(cfg))
    assert code == EXIT_CONFIG and "cluster K must be ≥ 1" in err


def test_validate_backtest_window_before_data(capsys, tmp_path):
    cfg = write_planted_run(tmp_path)
    text = cfg.read_text().replace("backtest: {start: 2022-06-01}", "backtest: {start: 2001-01-01, end: 2001-06-01}")
    cfg.write_text(text)
    code, _, err = run_cli(capsys, "validate", "--config", str(cfg))
    assert code == EXIT_CONFIG and "backtest window ends 2001-06-01, before the data starts" in err


def test_validate_missing_file_names_ticker(capsys, tmp_path):
    cfg = write_planted_run(tmp_path)
    (tmp_path / "data" / "MB.csv").unlink()
    code, _, err = run_cli(capsys, "validate", "--config", str(cfg))
    assert code == EXIT_CONFIG and "ticker MB" in err


def test_unreadable_config_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("tickers: [A, B\n", encoding="utf-8")
    code, _, err = run_cli(capsys, "validate", "--config", str(bad))
    assert code == EXIT_CONFIG and "cannot read config" in err


# --- stages ----------------------------------------------------------------------------

def test_empty_ticker_list_fails_before_any_stage(capsys, tmp_path):
    (tmp_path / "run.yaml").write_text("tickers: []\noutput_dir: out\n", encoding="utf-8")
    code, _, err = run_cli(capsys, "pipeline", "--config", str(tmp_path / "run.yaml"))
    assert code == EXIT_CONFIG and "ticker list is empty" in err
    assert not (tmp_path / "out").exists()


def test_volatility_writes_nine_by_five_files_deterministically(capsys, planted_run, tmp_path):
    out = tmp_path / "out"
    assert run_cli(capsys, "ingest", "--config", str(planted_run), "--out", str(out))[0] == EXIT_OK
    assert run_cli(capsys, "volatility", "--config", str(planted_run), "--out", str(out))[0] == EXIT_OK
    files = sorted((out / "volatility").iterdir())
    assert len(files) == 45
    assert {f.stem.split("_", 1)[1] for f in files} == {"parkinson", "garman_klass", "rogers_satchell", "yang_zhang", "mean"}
    first = {f.name: f.read_bytes() for f in files}
    run_cli(capsys, "volatility", "--config", str(planted_run), "--out", str(out))
    assert {f.name: f.read_bytes() for f in sorted((out / "volatility").iterdir())} == first


def test_missing_ticker_file_is_stage_failure_naming_ticker(capsys, tmp_path):
    cfg = write_planted_run(tmp_path)
    (tmp_path / "data" / "HC.csv").unlink()
    code, _, err = run_cli(capsys, "ingest", "--config", str(cfg))
    assert code == EXIT_STAGE and "HC" in err
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["failed_stage"] == "ingest" and "HC" in manifest["error"]


def test_pipeline_halts_at_first_failing_stage(capsys, tmp_path):
    cfg = write_planted_run(tmp_path, extra="granger: {threshold: 1.0e-300}\n")
    code, _, err = run_cli(capsys, "pipeline", "--config", str(cfg))
    assert code == EXIT_STAGE and "granger" in err
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["failed_stage"] == "granger"
    assert set(manifest["stages"]) == {"ingest", "volatility", "anomaly", "cluster"}
    assert not (tmp_path / "out" / "report.json").exists()


def test_pipeline_equals_stages_in_sequence(capsys, planted_run, tmp_path):
    whole, staged = tmp_path / "whole", tmp_path / "staged"
    assert run_cli(capsys, "pipeline", "--config", str(planted_run), "--out", str(whole))[0] == EXIT_OK
    for stage in STAGES:
        assert run_cli(capsys, stage, "--config", str(planted_run), "--out", str(staged))[0] == EXIT_OK
    assert outputs(whole) == outputs(staged)
    a = json.loads((whole / "manifest.json").read_text())
    b = json.loads((staged / "manifest.json").read_text())
    assert a["config_hash"] == b["config_hash"]
    assert {s: v["outputs"] for s, v in a["stages"].items()} == {s: v["outputs"] for s, v in b["stages"].items()}


def test_stage_from_reuses_artifacts(capsys, planted_run, tmp_path):
    out = tmp_path / "out"
    run_cli(capsys, "pipeline", "--config", str(planted_run), "--out", str(out))
    before = outputs(out)
    shutil.rmtree(out / "equity")
    (out / "report.json").unlink()
    code, _, _ = run_cli(capsys, "pipeline", "--config", str(planted_run), "--out", str(out), "--stage-from", "backtest")
    assert code == EXIT_OK and outputs(out) == before


def test_manifest_links_inputs_to_upstream_outputs(capsys, planted_run, tmp_path):
    out = tmp_path / "out"
    run_cli(capsys, "pipeline", "--config", str(planted_run), "--out", str(out))
    m = json.loads((out / "manifest.json").read_text())
    produced = {}
    for stage in STAGES:
        rec = m["stages"][stage]
        for path, digest in rec["inputs"].items():
            if path in produced:
                assert produced[path] == digest, (stage, path)
        produced.update(rec["outputs"])
    assert m["chosen_lag"] == 5 and m["mid_cluster"] == ["MA", "MB", "MC"]
    assert len(m["clean_window"]) == 2


def test_alpha_text_preset_validated_and_reported(capsys, planted_run, tmp_path):
    assert "granger alpha_text must lie in (0, 1)" in check(from_dict({"granger": {"alpha_text": 1.5}}))
    out = tmp_path / "out"
    run_cli(capsys, "pipeline", "--config", str(planted_run), "--out", str(out))
    settings = json.loads((out / "report.json").read_text())["settings"]
    assert (settings["granger_threshold"], settings["granger_alpha_text"]) == (0.025, 0.05)
