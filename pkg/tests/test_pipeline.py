import json

import pytest

from hashtag_lifecycle.pipeline import STAGES, ConfigError, PipelineConfig, load_config, run_pipeline, stage_closure

SCENARIO = {"standard": True, "seed": 0}


def test_stage_closure():
    assert stage_closure("detect") == ["detect"]
    assert stage_closure("classify") == ["detect", "features", "curves", "classify"]
    assert stage_closure("fit-survival") == STAGES[:4] + ["fit-survival"]


def test_config_validation():
    with pytest.raises(ConfigError):
        PipelineConfig(scenario=SCENARIO, stages=["bogus"])
    with pytest.raises(ConfigError):
        PipelineConfig(scenario=SCENARIO, stages=["features"])
    with pytest.raises(ConfigError):
        PipelineConfig(scenario=SCENARIO, stages=[])
    with pytest.raises(ConfigError):
        PipelineConfig()
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"scenario": SCENARIO, "colour": "red"})


def test_stages_are_put_in_run_order():
    cfg = PipelineConfig(scenario=SCENARIO, stages=["features", "detect"])
    assert cfg.stages == ["detect", "features"]


def test_config_digest_tracks_settings():
    a = PipelineConfig(scenario=SCENARIO)
    assert a.digest() == PipelineConfig(scenario=SCENARIO).digest()
    assert a.digest() != PipelineConfig(scenario=SCENARIO, seed=1).digest()


def test_load_config_json_and_yaml(tmp_path):
    j = tmp_path / "c.json"
    j.write_text(json.dumps({"seed": 3}))
    y = tmp_path / "c.yaml"
    y.write_text("seed: 3\nstages: [detect]\n")
    assert load_config(j) == {"seed": 3}
    assert load_config(y) == {"seed": 3, "stages": ["detect"]}
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(bad)
    lst = tmp_path / "l.yaml"
    lst.write_text("- 1\n")
    with pytest.raises(ConfigError):
        load_config(lst)


def test_inputs_need_episodes(tmp_path):
    f = tmp_path / "s.jsonl"
    f.write_text("")
    with pytest.raises(ConfigError):
        run_pipeline(PipelineConfig(inputs=[str(f)], stages=["detect"]), out=str(tmp_path / "o"))


def test_partial_run_writes_manifest(tmp_path):
    b = run_pipeline(PipelineConfig(scenario=SCENARIO, stages=["detect", "features", "curves"]), out=str(tmp_path))
    assert b.ok and b.stages_run == ["detect", "features", "curves"]
    assert set(b.timings) == set(b.stages_run)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["stages"] == b.stages_run
    assert "timings" not in json.dumps(manifest)
    for rel in manifest["outputs"]:
        assert (tmp_path / rel).is_file()
    assert len(b.detected) == 10
    assert not (tmp_path / "errors.json").exists()
