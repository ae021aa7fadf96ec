import subprocess
import sys

import pytest

from minpower import cli
from minpower.config import ConfigError, load_config
from minpower.harness import read_csv


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_single(capsys):
    assert cli.main(["single", "--seed", "4"]) == 0
    out = capsys.readouterr().out
    for s in ("[ZF]", "[RZF]", "[PA-RZF]", "[A-OLP]", "[OLP]", "lambda", "SINR"):
        assert s in out


def test_single_divergence_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "solver: {max_iter: 1}\nrate: 4\n")
    assert cli.main(["single", "--config", str(cfg)]) == cli.EXIT_NUMERICAL
    assert "diverged" in capsys.readouterr().err


@pytest.mark.parametrize("text", [
    "trials: 0\n",
    "bogus: 1\n",
    "system: {N: 4, K: 8}\n",
    "rate: [1, 2, 3]\n",
    "grid: {start: 1}\n",
    "- just\n- a list\n",
    "system: {sigma2: 1.0, noise_dbm: -100}\n",
    ": : :\n",
])
def test_config_errors(tmp_path, text, capsys):
    assert cli.main(["sweep-rate", "--config", str(write(tmp_path, text))]) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["single", "--config", str(tmp_path / "nope.yaml")]) == cli.EXIT_CONFIG


def test_bad_scheme_flag():
    assert cli.main(["single", "--schemes", "OLP,DPC"]) == cli.EXIT_CONFIG


def test_sweep_rate_outputs(tmp_path, capsys):
    cfg = write(tmp_path, "grid: [0.5, 1.5]\nsystem: {noise_dbm: -104}\n")
    out, plot = tmp_path / "r.csv", tmp_path / "r.svg"
    rc = cli.main(["sweep-rate", "--config", str(cfg), "--trials", "3", "--seed", "9",
                   "--schemes", "ZF,OLP", "--out", str(out), "--plot", str(plot)])
    assert rc == 0
    table = read_csv(out)
    assert [(r.value, r.scheme) for r in table.rows] == [(0.5, "OLP"), (0.5, "ZF"), (1.5, "OLP"), (1.5, "ZF")]
    assert all(r.trials == 3 for r in table.rows)
    assert plot.read_text().lstrip().startswith("<?xml")


def test_sweep_antennas_ignores_rate_grid(tmp_path):
    # a rate-sweep file reused for the antenna sweep keeps the default N grid
    cfg = write(tmp_path, "sweep: rate\ngrid: [0.5, 1.5]\n")
    out = tmp_path / "n.csv"
    rc = cli.main(["sweep-antennas", "--config", str(cfg), "--trials", "1",
                   "--schemes", "ZF", "--out", str(out)])
    assert rc == 0
    assert read_csv(out).rows[0].value == 8.0


def test_freeze_flag(tmp_path):
    cfg = cli._config(cli._parser().parse_args(["sweep-rate", "--freeze-positions"]))
    assert cfg.freeze_positions
    cfg = cli._config(cli._parser().parse_args(["sweep-rate"]))
    assert not cfg.freeze_positions


def test_load_config_full(tmp_path):
    cfg = load_config(write(tmp_path, """
system: {N: 12, K: 6, noise_dbm: -104, cell_radius: 200}
sweep: antennas
grid: [6, 12, 24]
rate: 2.5
trials: 7
seed: 11
schemes: [OLP, ZF]
freeze_positions: true
workers: 2
solver: {tol: 1.0e-9}
"""))
    assert cfg.system.N == 12 and cfg.system.cell_radius == 200
    assert cfg.system.sigma2 == pytest.approx(3.981e-14, rel=1e-3)
    assert cfg.grid == (6.0, 12.0, 24.0)
    assert cfg.rate == 2.5 and cfg.trials == 7 and cfg.workers == 2
    assert cfg.schemes == ("OLP", "ZF") and cfg.freeze_positions
    assert cfg.solver.tol == 1e-9


def test_grid_range(tmp_path):
    cfg = load_config(write(tmp_path, "grid: {start: 0.1, stop: 5, num: 15}\n"))
    assert len(cfg.grid) == 15


def test_validate_subcommand(tmp_path, capsys, monkeypatch):
    import minpower.harness as h

    real = h.validate
    monkeypatch.setattr(h, "validate", lambda cfg: real(cfg, ladder=(16,), ladder_trials=3))
    assert cli.main(["validate", "--trials", "4"]) == 0
    assert "rate_mse" in capsys.readouterr().out


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "minpower.cli", "single", "--schemes", "OLP"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "[OLP]" in r.stdout
