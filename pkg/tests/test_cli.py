import json

import pytest

from hashtag_lifecycle.cli import build_parser, main
from hashtag_lifecycle.synth import DEFAULT_EVENT_START


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--out", str(out), "--seed", "2"]) == 0
    return out


def test_simulate_writes_stream_and_truth(simulated):
    assert (simulated / "stream.jsonl").stat().st_size > 0
    spec = json.loads((simulated / "scenario.json").read_text())
    truth = json.loads((simulated / "truth.json").read_text())
    assert spec["seed"] == 2
    assert len(truth["relevant"]["d1"]) == 10


def test_validate_prints_statistics(simulated, capsys):
    assert main(["validate", str(simulated / "stream.jsonl")]) == 0
    assert capsys.readouterr().out.strip()


def test_detect_from_files(simulated, tmp_path, capsys):
    args = ["detect", str(simulated / "stream.jsonl"), "--event-start", str(DEFAULT_EVENT_START),
            "--episode-id", "d1", "--keywords", "debate,romney,obama", "--out", str(tmp_path)]
    assert main(args) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["stages"] == ["detect"]
    assert "outputs in" in capsys.readouterr().out


def test_usage_errors_exit_one(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert main(["detect", "--out", str(tmp_path)]) == 1
    assert main(["report", "--out", str(tmp_path / "empty")]) == 1
    cfg = tmp_path / "c.json"
    cfg.write_text("")
    assert main(["detect", "--scenario", "standard", "--config", str(cfg)]) == 1


def test_data_errors_exit_two(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"not": "an event"}\n')
    assert main(["validate", str(bad)]) == 2
    assert main(["validate", str(tmp_path / "missing.jsonl")]) == 2


def test_global_flags_after_subcommand():
    args = build_parser().parse_args(["run", "--scenario", "standard", "--seed", "4", "--with-env"])
    assert args.seed == 4 and args.with_env
    args = build_parser().parse_args(["--seed", "5", "run"])
    assert args.seed == 5 and not args.with_env


def test_report_prints_rendered_tables(tmp_path, capsys):
    (tmp_path / "tables").mkdir()
    (tmp_path / "tables" / "growth.txt").write_text("Growth models\n")
    assert main(["report", "--out", str(tmp_path)]) == 0
    assert "Growth models" in capsys.readouterr().out
