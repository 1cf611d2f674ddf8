import json
import subprocess
import sys

import pytest

from qoscompose import cli
from qoscompose.config import default_config_path


def test_validate_default_config(capsys):
    assert cli.main(["validate"]) == 0
    assert cli.main(["validate", str(default_config_path())]) == 0
    assert capsys.readouterr().out.startswith("ok config=")


def test_validate_reports_every_problem(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": 0, "radio": {"range": -1}, "colour": "red"}))
    assert cli.main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "colour: unknown field" in err


def test_validate_collects_field_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": 0, "radio": {"range": -1}}))
    assert cli.main(["validate", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "nodes" in err and "radio.range" in err


@pytest.mark.parametrize("text", ["{not json", "[1, 2]"])
def test_validate_unparseable(tmp_path, text):
    bad = tmp_path / "bad.json"
    bad.write_text(text)
    assert cli.main(["validate", str(bad)]) == 2


def test_missing_config_file_is_config_error(tmp_path):
    assert cli.main(["validate", str(tmp_path / "nope.json")]) == 2


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["run", "--bogus"],
                                  ["run", "--nodes", "many"], ["run", "--method", "greedy"],
                                  ["compare", "--seeds", "x-y"], ["compare", "--workers", "0"]])
def test_usage_errors(argv, capsys):
    assert cli.main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_help_exits_cleanly(capsys):
    assert cli.main(["--help"]) == 0


def test_invalid_override_is_config_error(tmp_path):
    assert cli.main(["run", "--nodes", "-3", "--out", str(tmp_path)]) == 2


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["run", "--nodes", "2", "--duration", "10", "--seed", "1",
                         "--out", str(out)]) == 0
    for name in ("config.resolved", "trace.log", "metrics.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", "--nodes", "2", "--duration", "5"]) == 0
    assert (tmp_path / "env" / "trace.log").is_file()


def test_replay_matches_run(tmp_path, capsys):
    assert cli.main(["run", "--nodes", "15", "--duration", "25", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert cli.main(["replay", str(tmp_path / "trace.log")]) == 0
    assert capsys.readouterr().out == (tmp_path / "metrics.csv").read_text()


def test_replay_truncated_trace_is_run_failure(tmp_path, capsys):
    assert cli.main(["run", "--nodes", "5", "--duration", "10", "--out", str(tmp_path)]) == 0
    trace = tmp_path / "trace.log"
    lines = trace.read_text().splitlines()
    trace.write_text("\n".join(lines[:-1]) + "\n")
    capsys.readouterr()
    assert cli.main(["replay", str(trace)]) == 3
    assert "last valid record" in capsys.readouterr().err


def test_replay_missing_files_are_usage_errors(tmp_path):
    assert cli.main(["replay", str(tmp_path / "trace.log")]) == 1
    (tmp_path / "trace.log").write_text("")
    assert cli.main(["replay", str(tmp_path / "trace.log")]) == 1


def test_run_failure_exit_code(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise RuntimeError("simulated crash")

    monkeypatch.setattr(cli, "run_scenario", boom)
    assert cli.main(["run", "--out", str(tmp_path)]) == 3


def test_compare_writes_summary(tmp_path, capsys):
    assert cli.main(["compare", "--seeds", "2", "--nodes", "15", "--duration", "20",
                     "--out", str(tmp_path)]) == 0
    assert "proposed wins" in capsys.readouterr().out
    assert (tmp_path / "summary.csv").is_file()
    assert (tmp_path / "proposed" / "seed_2" / "metrics.csv").is_file()


def test_seed_parsing():
    assert cli.parse_seeds("3") == [1, 2, 3]
    assert cli.parse_seeds("4-6") == [4, 5, 6]
    assert cli.parse_seeds("9,2") == [9, 2]


def test_console_script_never_prints_traceback(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qoscompose.cli", "validate",
                           str(tmp_path / "missing.json")], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "Traceback" not in proc.stderr
