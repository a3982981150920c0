import json
from pathlib import Path

import numpy as np
import pytest

from drivenchain.cli import main
from drivenchain.config import Experiment, parse_config, preset_names, preset_text
from drivenchain.dynamics import Method
from drivenchain.errors import ConfigError

SMALL = """
experiment = sweep-amplitude
[chain]
n_sites = 2
omega0 = 10
j = 0.01
[drive]
omega_drive = 0.3
[noise]
gamma_diss = 0.001
[integrator]
t_end = 60
[sweep]
grid = 0, linspace(1, 2, 3), 2.5
[output]
name = small
"""


def test_presets_parse():
    names = preset_names()
    for expected in ("fig2_offres", "fig2_res", "fig2_noh2", "fig3", "fig4", "fig5", "fig6", "fig7", "evolve"):
        assert expected in names
    for name in names:
        parse_config(preset_text(name))


def test_fig2_presets():
    off = parse_config(preset_text("fig2_offres"))
    assert off.experiment is Experiment.SWEEP_AMPLITUDE
    assert off.chain.n_sites == 2 and off.chain.omega == (10.0, 10.0) and off.chain.j == (0.01,)
    assert off.chain.omega_drive == 0.3 and off.noise.gamma_diss == 0.001
    assert off.sweep["grid"].size == 121 and off.integrator.t_end == 1000
    res = parse_config(preset_text("fig2_res"))
    assert res.chain.omega_drive == 2.0 and res.sweep["resonant"] is True
    assert parse_config(preset_text("fig2_noh2")).sweep["include_h2"] is False
    assert parse_config(preset_text("fig7")).integrator.method is Method.SPLIT


def test_number_lists():
    cfg = parse_config(SMALL)
    assert cfg.sweep["grid"].tolist() == [0, 1, 1.5, 2, 2.5]
    cfg = parse_config(SMALL.replace("grid = 0, linspace(1, 2, 3), 2.5", "rates = 0, logspace(-2, -1, 2)"))
    assert cfg.sweep["rates"].tolist() == [0, 0.01, 0.1]


@pytest.mark.parametrize(
    "text,message",
    [
        ("experiment =\n", "experiment"),
        ("[chain]\nn_sites = 2\n", "experiment"),
        ("experiment = evolve\n[chain]\nn_site = 2\n", "n_site"),
        ("experiment = evolve\n[chian]\n", "chian"),
        ("experiment = evolve\nthis is not valid\n", "line 2"),
        ("experiment = teleport\n", "experiment"),
        ("experiment = evolve\n[chain]\nn_sites = 2\nomega0 = 10\nj = 0.01\n[noise]\ngamma_diss = -1\n", "gamma_diss"),
        ("experiment = evolve\n[chain]\nn_sites = 2\nomega0 = 10\nj = 0.01\n[drive]\ne_ac = 1\n", "omega_drive"),
        ("experiment = evolve\n[chain]\nn_sites = 2\nomega0 = 10\nj = abc\n", "j"),
        ("experiment = evolve\n[chain]\nn_sites = 2\nomega0 = 10\nj = 0.01\nj = 0.02\n", "repeated"),
        ("experiment = evolve\n[chain]\nn_sites = 2\nomega0 = 10\nj = 0.01\n[integrator]\ndt_max = 1\n", "dt_max"),
    ],
)
def test_config_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_syntax_error_reports_line_number():
    with pytest.raises(ConfigError, match="line 4"):
        parse_config("experiment = evolve\n\n[chain]\n= 3\n")


def run_cli(tmp_path, text, *args):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return main([str(path), "--out", str(tmp_path / "out"), *args])


def test_cli_sweep_and_oracle(tmp_path):
    assert run_cli(tmp_path, SMALL, "--oracle-check") == 0
    csv = (tmp_path / "out" / "small.csv").read_text()
    lines = csv.split("\n")
    assert lines[0] == "eac_over_omega,max_transfer,oracle_abs_diff"
    assert len(lines) == 7 and lines[-1] == "" and "\r" not in csv
    rows = np.array([[float(x) for x in line.split(",")] for line in lines[1:-1]])
    assert np.all(rows[:, 2] <= 1e-6)
    meta = json.loads((tmp_path / "out" / "small.meta").read_text())
    assert "rad/ns" in meta["units"]
    assert meta["config"]["chain"]["omega0"] == "10"
    assert meta["checks"]["max_trace_error"] <= 1e-9
    assert "version" in meta and "wall_time_s" in meta


def test_cli_floats_round_trip(tmp_path):
    assert run_cli(tmp_path, SMALL) == 0
    for line in (tmp_path / "out" / "small.csv").read_text().splitlines()[1:]:
        for field in line.split(","):
            assert repr(float(field)) == field


def test_cli_worker_count_does_not_change_output(tmp_path):
    text = SMALL.replace("grid = 0, linspace(1, 2, 3), 2.5", "grid = linspace(0, 3, 40)")
    assert main([str(_write(tmp_path, text)), "--out", str(tmp_path / "a"), "--workers", "1"]) == 0
    assert main([str(_write(tmp_path, text)), "--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    assert (tmp_path / "a" / "small.csv").read_bytes() == (tmp_path / "b" / "small.csv").read_bytes()


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "cfg.cfg"
    path.write_text(text)
    return path


def test_cli_invalid_config_exits_1_without_output(tmp_path, capsys):
    assert run_cli(tmp_path, SMALL.replace("omega0", "omega_zero")) == 1
    assert not (tmp_path / "out").exists()
    assert "omega_zero" in capsys.readouterr().err
    assert main([str(tmp_path / "missing.cfg")]) == 1


def test_cli_semantic_error_exits_1(tmp_path):
    bad = SMALL.replace("experiment = sweep-amplitude", "experiment = dephasing-scan")
    assert run_cli(tmp_path, bad) == 1
    assert not (tmp_path / "out").exists()


def test_cli_numerical_failure_exits_2(tmp_path, monkeypatch):
    from drivenchain import cli
    from drivenchain.errors import InvariantViolation

    def explode(cfg):
        raise InvariantViolation("trace drift")

    monkeypatch.setattr(cli, "execute", explode)
    assert run_cli(tmp_path, SMALL) == 2
    assert not (tmp_path / "out").exists()


def test_cli_evolve_oracle(tmp_path):
    text = preset_text("evolve").replace("t_end = 400", "t_end = 60")
    assert run_cli(tmp_path, text, "--oracle-check") == 0
    lines = (tmp_path / "out" / "evolve.csv").read_text().splitlines()
    assert lines[0] == "time,population_1,population_2,coherence_sum,oracle_abs_diff"
    assert max(float(line.split(",")[-1]) for line in lines[1:]) <= 1e-6


def test_cli_accepts_preset_names(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    from drivenchain import cli

    captured = {}
    monkeypatch.setattr(cli, "run", lambda cfg: captured.setdefault("cfg", cfg) and 0)
    assert main(["fig2_offres", "--workers", "2"]) == 0
    assert captured["cfg"].workers == 2 and captured["cfg"].name == "fig2_offres"
