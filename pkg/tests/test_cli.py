import csv
import json
import math

import numpy as np
import pytest

from windbag import cli, pipeline
from windbag.config import FIELDS, PipelineConfig, load_config, read_config_file, save_config
from windbag.dataset import RECORDS_PER_DAY, synth_generate

FAST = ["--synth_days", "12", "--max_epochs", "300", "--ensemble_size", "3", "--baseline_window", "5"]


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


# ------------------------------------------------------------------- config


def test_config_defaults_match_module_defaults():
    from windbag.bagging import BaggingConfig
    from windbag.bpnn import NetConfig
    from windbag.dataset import PowerCurveParams

    cfg = PipelineConfig()
    net = cfg.net_config(3, 0)
    assert net == NetConfig(3, seed=0)
    assert cfg.bagging_config(net, 0) == BaggingConfig(base_config=net)
    assert cfg.curve_params() == PowerCurveParams(noise_std=cfg.noise_std)
    assert cfg.clusters == 3 and cfg.restarts == 10 and cfg.baseline_window == 29 and cfg.horizon_hours == 24
    assert cfg.relief_threshold == 0.01 and cfg.relief_k == 10 and cfg.relief_m == 0


def test_config_round_trips_through_ini(tmp_path):
    cfg = PipelineConfig(synth_days=33, learning_rate=0.1 + 0.2, regimes=False, forced_include="")
    save_config(cfg, tmp_path / "c.ini")
    assert load_config(tmp_path / "c.ini") == cfg


def test_precedence_flag_over_file_over_default(tmp_path):
    (tmp_path / "c.ini").write_text("[synth]\nsynth_days = 40\nsynth_seed = 5\n")
    cfg = load_config(tmp_path / "c.ini", {"synth_days": 50, "clusters": None})
    assert cfg.synth_days == 50 and cfg.synth_seed == 5 and cfg.clusters == 3


def test_config_rejects_unknown_keys_and_bad_values(tmp_path):
    (tmp_path / "c.ini").write_text("[net]\nlearning_rat = 1\n")
    with pytest.raises(ValueError, match="learning_rat"):
        read_config_file(tmp_path / "c.ini")
    for kw in (dict(granularity="daily"), dict(horizon_hours=30), dict(clusters=0), dict(cut_in=20.0)):
        with pytest.raises(ValueError):
            PipelineConfig(**kw)


def test_every_key_is_a_flag():
    parser = cli.build_parser()
    sub = parser._subparsers._group_actions[0].choices["pipeline"]
    dests = {a.dest for a in sub._actions}
    assert set(FIELDS) <= dests


# -------------------------------------------------------------------- synth


def test_synth_writes_csv_and_manifest(tmp_path, capsys):
    code, _ = run(["synth", "--synth_days", 3, "--output_dir", tmp_path], capsys)
    assert code == 0
    rows = (tmp_path / "synthetic.csv").read_text().splitlines()
    assert len(rows) == 1 + 3 * RECORDS_PER_DAY
    manifest = json.loads((tmp_path / "synthetic.manifest.json").read_text())
    assert manifest["params"]["synth_days"] == 3 and manifest["rows"] == 3 * RECORDS_PER_DAY


def test_synth_from_manifest_reproduces_bytes(tmp_path, capsys):
    run(["synth", "--synth-days", 2, "--synth_seed", 77, "--noise_std", 12.5, "--out", tmp_path / "a.csv"], capsys)
    run(["synth", "--from-manifest", tmp_path / "a.manifest.json", "--out", tmp_path / "b.csv"], capsys)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_synth_zero_days_fails_before_writing(tmp_path, capsys):
    code, out = run(["synth", "--synth_days", 0, "--output_dir", tmp_path / "o"], capsys)
    assert code != 0 and "synth_days" in out.err
    assert not (tmp_path / "o").exists()


def test_bad_flag_value(tmp_path, capsys):
    code, out = run(["pipeline", "--bagging", "maybe", "--output_dir", tmp_path], capsys)
    assert code != 0 and "bagging" in out.err


# ----------------------------------------------------------------- pipeline


def test_pipeline_writes_all_artifacts(tmp_path, capsys):
    code, out = run(["pipeline", *FAST, "--output_dir", tmp_path], capsys)
    assert code == 0, out.err
    for name in pipeline.ARTIFACTS + ("config.ini",):
        assert (tmp_path / name).exists(), name
    report = json.loads((tmp_path / "eval_report.json").read_text())
    assert math.isfinite(report["rmse"]) and report["n"] == 24
    with open(tmp_path / "forecast.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["timestamp", "actual_kw", "predicted_kw"] and len(rows) == 25
    ts = [int(r[0]) for r in rows[1:]]
    assert ts == sorted(ts)


def test_pipeline_stage_error_names_the_stage(tmp_path, capsys):
    code, out = run(["pipeline", *FAST, "--clusters", 50, "--output_dir", tmp_path], capsys)
    assert code == 2
    assert "[similar_days]" in out.err and "k=50" in out.err and "hint" in out.err


def test_pipeline_rerun_from_saved_config_is_byte_identical(tmp_path, capsys):
    run(["pipeline", *FAST, "--workers", 3, "--output_dir", tmp_path / "a"], capsys)
    run(["pipeline", "--config", tmp_path / "a" / "config.ini", "--output_dir", tmp_path / "b"], capsys)
    assert (tmp_path / "a" / "forecast.csv").read_bytes() == (tmp_path / "b" / "forecast.csv").read_bytes()
    assert (tmp_path / "a" / "model" / "manifest.json").read_bytes() == \
        (tmp_path / "b" / "model" / "manifest.json").read_bytes()


def test_pipeline_from_csv_source(tmp_path, capsys):
    run(["synth", "--synth_days", 8, "--out", tmp_path / "d.csv"], capsys)
    code, out = run(["pipeline", *FAST, "--source", tmp_path / "d.csv", "--bagging", "false",
                     "--output_dir", tmp_path / "r"], capsys)
    assert code == 0, out.err
    assert (tmp_path / "r" / "model" / "model.json").exists()


def test_compare_reports_three_approaches(tmp_path, capsys):
    code, out = run(["compare", *FAST, "--output_dir", tmp_path], capsys)
    assert code == 0, out.err
    comp = json.loads((tmp_path / "comparison.json").read_text())
    assert [r["approach_name"] for r in comp["reports"]] == list(pipeline.APPROACHES)
    assert len(comp["reductions"]) == 6
    for name in pipeline.APPROACHES:
        assert (tmp_path / f"residuals_{name}.csv").exists()
    assert "reductions" in out.out


# -------------------------------------------------------------- eval, inspect


def test_eval_command(tmp_path, capsys):
    p = tmp_path / "f.csv"
    p.write_text("timestamp,actual_kw,predicted_kw\n0,0,3\n60,0,4\n")
    code, out = run(["eval", p, "--json", tmp_path / "e.json", "--residuals", tmp_path / "r.csv"], capsys)
    assert code == 0
    report = json.loads((tmp_path / "e.json").read_text())
    assert report["rmse"] == pytest.approx(3.5355339, abs=1e-7) and report["mae"] == 3.5
    assert "3.535534" in out.out
    assert (tmp_path / "r.csv").read_text().splitlines()[1] == "0,0.0,3.0,-3.0"
    code, out = run(["eval", p, "--actual-col", "nope"], capsys)
    assert code == 2 and "nope" in out.err


def test_inspect_model(tmp_path, capsys):
    run(["pipeline", *FAST, "--output_dir", tmp_path / "e"], capsys)
    code, out = run(["inspect-model", tmp_path / "e" / "model"], capsys)
    info = json.loads(out.out)
    assert code == 0 and info["kind"] == "ensemble" and info["members"] == 3
    run(["pipeline", *FAST, "--bagging", "no", "--output_dir", tmp_path / "s"], capsys)
    code, out = run(["inspect-model", tmp_path / "s" / "model"], capsys)
    info = json.loads(out.out)
    assert info["kind"] == "network" and info["features"] == ["wind_speed", "ambient_temp"]
