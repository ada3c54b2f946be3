import csv
import json
from pathlib import Path

import pytest

from lastiterate import acceptance, cli
from lastiterate.acceptance import CriterionResult
from lastiterate.config import ConfigError, ExperimentConfig, parse_config, parse_config_text
from lastiterate.dynamics import run_realization
from lastiterate.games import make_matching_pennies
from lastiterate.io import emit_csv, format_value, trajectory_rows, write_json
from lastiterate.strategies import hedge

EXAMPLE = "game = matching-pennies\nstrategy1 = hedge:r=0.5\nstrategy2 = hedge:r=0.5\nmode = realization\nsteps = 1000000"


def test_example_config():
    cfg = parse_config_text(EXAMPLE)
    assert cfg.steps == 10 ** 6 and cfg.mode == "realization" and cfg.seed == 0
    assert cfg.run_config().steps == 10 ** 6


@pytest.mark.parametrize("text", [
    "strategy1 = hedge:r=0.3",
    "colour = blue",
    "steps = many",
    "mode = dreaming",
    "delta = 0.7",
    "tail_value = 2",
    "game = family:1",
    "opponent = coin:q=1",
    "probe_t = 10\nprobe_s = 5/20",
    "just a line",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_error_names_key():
    with pytest.raises(ConfigError, match="strategy1"):
        parse_config_text("strategy1 = hedge:r=0.3")
    with pytest.raises(ConfigError, match="unknown key 'colour'"):
        parse_config_text("colour = blue")


def test_round_trip_and_overrides(tmp_path):
    cfg = parse_config_text("# comment\n\nopponent = piecewise:q=0.5,t=100,s=5\nsteps=2e3\nprobe_s = 1/2/3\ndelta=0.05")
    assert cfg.strategy2 is None and cfg.steps == 2000 and cfg.probe_s == (1, 2, 3)
    path = tmp_path / "c.txt"
    path.write_text(cfg.to_text())
    assert parse_config(path) == cfg
    over = parse_config(path, ["seed=7", "strategy1=logbarrier:r=0.6"])
    assert over.seed == 7 and over.strategy1 == "logbarrier:r=0.6"
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.txt")


def test_hash_tracks_semantic_fields():
    base = ExperimentConfig()
    assert base.config_hash() == ExperimentConfig().config_hash()
    assert len(base.config_hash()) == 64
    assert ExperimentConfig(output_dir="/tmp/x").config_hash() == base.config_hash()
    for kw in ({"seed": 1}, {"steps": 10001}, {"strategy1": "hedge:r=0.6"}, {"delta": 0.2}, {"probe_s": (3,)}):
        assert ExperimentConfig(**kw).config_hash() != base.config_hash()
    # canonical descriptors hash identically
    assert ExperimentConfig(strategy1="hedge:r=0.50").config_hash() == base.config_hash()


def test_csv_header_only_and_two_lines(tmp_path):
    p = emit_csv([], "dynamics", tmp_path / "empty.csv")
    assert p.read_bytes() == b"t,p_t,q_t,p_hat,q_hat,p_bar,q_bar,payoff1,payoff2\n"
    traj = run_realization(make_matching_pennies(), hedge(), hedge(), 10, 1)
    p = emit_csv(list(trajectory_rows(traj))[:1], "dynamics", tmp_path / "one.csv")
    raw = p.read_bytes()
    assert raw.count(b"\n") == 2 and b"\r" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows[0][0] == "t" and len(rows[1]) == 9 and float(rows[1][1]) == traj.final.p_t


def test_float_policy():
    assert format_value(0.1) == "0.1" and float(format_value(0.1)) == 0.1
    assert format_value(1 / 3) == repr(1 / 3) and format_value(3.0) == "3" and format_value(True) == "1"


def test_csv_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([], "nonsense", tmp_path / "x.csv")
    with pytest.raises(ValueError):
        emit_csv([(1,)], "pmf", tmp_path / "x.csv")
    with pytest.raises(OSError, match="missing"):
        emit_csv([], "pmf", tmp_path / "missing" / "x.csv")


def test_json_sorted(tmp_path):
    p = write_json({"b": 1, "a": float("inf")}, tmp_path / "x.json")
    assert list(json.loads(p.read_text())) == ["a", "b"]


def manifest(out):
    m = json.loads((out / "manifest.json").read_text())
    for f in m["outputs"]:
        assert Path(f).exists()
    return m


def test_simulate(tmp_path):
    out = tmp_path / "sim"
    code = cli.main(["--set", "steps=500", "--set", "n_runs=2", "--set", "tail=0", "--out", str(out), "simulate"])
    assert code == 0
    m = manifest(out)
    assert m["command"] == "simulate" and "seed = 0" in m["config"] and len(m["config_hash"]) == 64
    assert sorted(p.name for p in out.glob("trajectory_*.csv")) == ["trajectory_000.csv", "trajectory_001.csv"]
    again = tmp_path / "again"
    cli.main(["--set", "steps=500", "--set", "n_runs=2", "--set", "tail=0", "--out", str(again), "simulate"])
    assert (out / "trajectory_001.csv").read_bytes() == (again / "trajectory_001.csv").read_bytes()


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["--set", "steps=50", "simulate"]) == 0
    assert (tmp_path / "env" / "trajectory_000.csv").exists()


def test_probe_commands(tmp_path):
    common = ["--set", "probe_t=2000", "--set", "probe_s=0/40", "--set", "n_runs=20", "--out"]
    assert cli.main(common + [str(tmp_path / "s"), "probe-sensitivity"]) == 0
    rep = json.loads((tmp_path / "s" / "sensitivity.json").read_text())
    assert [r["s"] for r in rep["reports"]] == [0, 40] and "mean_response" in rep["best"]
    assert cli.main(["--set", "steps=2000", "--set", "n_runs=5", "--workers", "2", "--out", str(tmp_path / "o"),
                     "probe-oscillation"]) == 0
    assert (tmp_path / "o" / "time_average.csv").exists()
    assert cli.main(["--set", "steps=2000", "--set", "n_runs=2", "--out", str(tmp_path / "r"), "audit-regret"]) == 0
    assert json.loads((tmp_path / "r" / "regret.json").read_text())["n_runs"] == 2
    assert cli.main(["--set", "probe_t=400", "--set", "probe_s=20", "--out", str(tmp_path / "p"), "pmf-tools"]) == 0
    pmf = json.loads((tmp_path / "p" / "pmf_report.json").read_text())
    assert abs(pmf["shift_ratio_measured"] - 0.2234) <= 5e-4


def test_exit_codes(tmp_path, capsys):
    out = ["--out", str(tmp_path)]
    assert cli.main(out + ["--set", "strategy1=hedge:r=0.3", "simulate"]) == cli.EXIT_CONFIG
    assert "strategy1" in capsys.readouterr().err
    assert cli.main(out + ["--config", str(tmp_path / "nope"), "simulate"]) == cli.EXIT_CONFIG
    assert cli.main(out + ["--workers", "0", "simulate"]) == cli.EXIT_CONFIG
    assert cli.main(out + ["--set", "mode=telepathic", "--set", "n_runs=3", "audit-regret"]) == cli.EXIT_CONFIG
    assert cli.main(out + ["--set", "delta=0.49", "--set", "game=family:0.25,0.429", "probe-oscillation"]) == cli.EXIT_CONFIG
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["--out", str(blocker / "sub"), "simulate"]) == cli.EXIT_RUNTIME


def fake(number, passed):
    return lambda full=True, workers=1: CriterionResult(number, f"fake {number}", passed, "detail")


def test_check_all_plumbing(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(acceptance, "CRITERIA", (fake(1, True), fake(2, True)))
    monkeypatch.setattr(acceptance, "FAST", {1, 2})
    assert cli.main(["--out", str(tmp_path / "ok"), "check-all"]) == cli.EXIT_OK
    text = (tmp_path / "ok" / "acceptance.txt").read_text()
    assert "criterion  1 PASS" in text and "2/2" in text
    monkeypatch.setattr(acceptance, "CRITERIA", (fake(1, True), fake(2, False)))
    assert cli.main(["--out", str(tmp_path / "bad"), "check-all", "--full"]) == cli.EXIT_FAIL
    assert "criterion  2 FAIL" in capsys.readouterr().out
