import json

import pytest

from yieldalloc.cli import EXIT_IO, EXIT_USAGE, main
from yieldalloc.errors import ConfigError, ScenarioParseError
from yieldalloc.scenario import load_scenario


def run(*argv):
    return main([str(a) for a in argv])


def test_generate_writes_a_scenario(tmp_path):
    out = tmp_path / "run1"
    assert run("generate", "--m", 5, "--n", 10000, "--T", 24, "--seed", 1, "--out", out) == 0
    s = load_scenario(out / "train.scn")
    assert (s.m, s.n, s.T) == (5, 10000, 24)


def test_generate_is_byte_identical_on_rerun(tmp_path):
    args = ("generate", "--m", 2, "--n", 300, "--seed", 4, "--out", tmp_path)
    run(*args)
    first = (tmp_path / "train.scn").read_bytes()
    run(*args)
    assert (tmp_path / "train.scn").read_bytes() == first


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text('[generator]\nm = 2\nn = 500\nT = 6\nintraday = "diurnal"\ndemand_fraction_range = [0.1, 0.2]\n')
    assert run("generate", "--config", cfg, "--n", 400, "--out", tmp_path) == 0
    s = load_scenario(tmp_path / "train.scn")
    assert (s.m, s.n, s.T) == (2, 400, 6)


def test_solve_optimal_prints_and_saves(tmp_path, capsys):
    run("generate", "--m", 2, "--n", 2000, "--T", 6, "--seed", 1, "--out", tmp_path)
    capsys.readouterr()
    assert run("solve-optimal", tmp_path / "train.scn") == 0
    text = capsys.readouterr().out
    assert "alpha* =" in text and "R* =" in text and "gap" in text
    saved = json.loads((tmp_path / "train.optimal.json").read_text())
    assert len(saved["alpha_star"]) == 2 and saved["relative_gap"] <= 1e-3


def test_exit_codes(tmp_path):
    assert run("solve-optimal", tmp_path / "missing.scn") == EXIT_IO
    bad = tmp_path / "bad.scn"
    bad.write_text("H 1 1 1\nC 1 1 1.0 2.0 1.0 0.5\nI 1 1 0.1 0.5 0.2\n")
    assert run("solve-optimal", bad) == ScenarioParseError.exit_code
    assert run("generate", "--m", 0, "--n", 5, "--out", tmp_path) == ConfigError.exit_code
    cfg = tmp_path / "c.toml"
    cfg.write_text("[trainer]\nlearning_rate = 1\n")
    run("generate", "--m", 1, "--n", 50, "--T", 2, "--out", tmp_path)
    run("solve-optimal", tmp_path / "train.scn")
    opt = tmp_path / "train.optimal.json"
    assert run("train", tmp_path / "train.scn", "--config", cfg, "--alpha", opt, "--r-star", opt,
               "--out", tmp_path) == ConfigError.exit_code
    with pytest.raises(SystemExit) as err:
        run("frobnicate")
    assert err.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as err:
        run("generate", "--bogus")
    assert err.value.code == EXIT_USAGE


def test_pipeline_builds_a_summary_over_five_scenarios(tmp_path, capsys):
    reports = tmp_path / "reports"
    for k in range(5):
        d = tmp_path / f"pub{k}"
        assert run("generate", "--m", 2, "--n", 1500, "--T", 6, "--seed", k, "--out", d) == 0
        assert run("drift", d / "train.scn", "--volume-factor", 0.9, "--price-factor", 1.2,
                   "--quality-noise", 0.05, "--seed", 100 + k, "--out", d) == 0
        for name in ("train", "test"):
            assert run("solve-optimal", d / f"{name}.scn") == 0
        common = ["--alpha", d / "train.optimal.json", "--r-star", d / "test.optimal.json"]
        for b in ("cf", "pid"):
            assert run("run-baseline", b, d / "test.scn", *common, "--label", f"pub{k}",
                       "--out", reports / f"pub{k}") == 0
        assert run("train", d / "test.scn", "--method", "mapolo", "--episodes", 3, "--seed", k, *common,
                   "--reference", d / "train.optimal.json", "--out", d / "model") == 0
        assert run("evaluate", d / "model" / "mapolo.npz", d / "test.scn", *common,
                   "--scenario-label", f"pub{k}", "--out", reports / f"pub{k}") == 0
    capsys.readouterr()
    assert run("report", reports, "--out", tmp_path) == 0
    table = capsys.readouterr().out
    lines = table.splitlines()
    assert lines[0].split() == ["scenario", "cf", "mapolo", "pid"]
    assert [ln.split()[0] for ln in lines if ln.startswith("pub")] == [f"pub{k}" for k in range(5)]
    assert any(ln.startswith("Average") for ln in lines)
    assert (tmp_path / "summary.csv").read_text().count("\n") == 7
