import json
import subprocess
import sys

import pytest

from llmsat.cli import main, parse_args


def test_defaults():
    args = parse_args([])
    assert (args.scenario, args.runs, args.backend, args.latency, args.loopback) == ("A", 5, "scripted", 5.0, True)


def test_config_file_supplies_defaults(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"scenario": "C", "runs": 2, "noise": 0.01, "loopback": False}))
    args = parse_args(["--config", str(config), "--runs", "3"])
    assert (args.scenario, args.runs, args.noise, args.loopback) == ("C", 3, 0.01, False)


def test_config_rejects_unknown_keys(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"api_key": "x"}))
    with pytest.raises(SystemExit, match="unknown keys api_key"):
        parse_args(["--config", str(config)])


def test_list_policies(capsys):
    assert main(["--list-policies"]) == 0
    assert "scenario_c_justify" in capsys.readouterr().out.split()


def test_batch_run_writes_reports(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["--scenario", "C", "--runs", "2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# Scenario C") and "| Avg. | 100% |" in text
    assert sorted(p.name for p in out.iterdir()) == [
        "report.csv", "report.json", "report.md",
        "run_1.transcript.txt", "run_1.usage.json", "run_2.transcript.txt", "run_2.usage.json",
    ]


def test_replay_backend_flag(tmp_path, capsys):
    assert main(["--backend", "replay", "--source", "scenario_a_run5", "--runs", "1", "--out", str(tmp_path)]) == 0
    assert "| 1 | ✗ |" in capsys.readouterr().out


def test_bad_source_is_reported(tmp_path, capsys):
    assert main(["--source", "missing_policy", "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("error: ")


def test_live_backend_without_key_gives_partial(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    assert main(["--backend", "live", "--runs", "2", "--out", str(tmp_path)]) == 1
    assert "**Partial report:** 1 of 2 runs completed" in capsys.readouterr().out


def test_module_entry_point():
    result = subprocess.run([sys.executable, "-m", "llmsat", "--help"], capture_output=True, text=True, check=True)
    assert "--scenario" in result.stdout and "--noise" in result.stdout
