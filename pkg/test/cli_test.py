import json
import os

import pytest

import driftsquint.harness as harness
import driftsquint.tables as tables
from driftsquint.cli import main


@pytest.fixture(autouse=True)
def one_worker(monkeypatch):
    monkeypatch.setenv("DRIFTSQUINT_THREADS", "1")


def test_run(tmp_path):
    out = str(tmp_path / "run")
    assert main(["run", "--algo", "squint", "--K", "3", "--T", "16", "--seed", "2", "--out", out]) == 0
    assert sorted(os.listdir(out)) == ["config.json", "run.csv"]
    config = harness.read_config(os.path.join(out, "config.json"))
    assert (config.algorithm, config.experts, config.horizon, config.seed) == ("squint", 3, 16, 2)
    run = tables.from_csv(os.path.join(out, "run.csv"))
    assert run.nrows() == 16


def test_run_from_config_with_overrides(tmp_path):
    out = str(tmp_path / "first")
    main(["run", "--algo", "hedge", "--T", "8", "--out", out])
    again = str(tmp_path / "second")
    path = os.path.join(out, "config.json")
    assert main(["run", "--config", path, "--algo", "squint-ce-jun", "--seed", "5", "--out", again]) == 0
    config = harness.read_config(os.path.join(again, "config.json"))
    assert (config.algorithm, config.horizon, config.seed) == ("squint-ce-jun", 8, 5)


def test_bounds(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["bounds", "--algo", "squint-ce-uniform", "--T", "32", "--out", out]) == 0
    assert sorted(os.listdir(out)) == ["bounds.csv", "config.json", "run.csv"]
    assert tables.from_csv(os.path.join(out, "run.csv")).nrows() == 32
    printed = capsys.readouterr().out
    assert "squintce-2T" in printed
    assert "smallest asserted slack" in printed


def test_compare(tmp_path):
    out = str(tmp_path)
    code = main(
        ["compare", "--algos", "squint,squint-ce-uniform", "--T", "16", "--seeds", "2", "--out", out]
    )
    assert code == 0
    table = tables.from_csv(os.path.join(out, "comparison.csv"))
    assert "regret:squint-ce-uniform" in table.header()
    assert table.nrows() == 16 * 17 // 2


def test_verify(capsys):
    assert main(["verify", "--suite", "hedge", "--runs", "2"]) == 0
    assert "hedge" in capsys.readouterr().out


def test_scenarios(capsys):
    assert main(["scenarios", "--K", "2", "--T", "8"]) == 0
    documents = json.loads(capsys.readouterr().out)
    assert [d["name"] for d in documents] == ["stationary", "single-switch", "two-switch", "drift"]


def test_errors_exit_with_two(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"algorithm": "squint"}')
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--scenario", "sawtooth", "--out", str(tmp_path)]) == 2
