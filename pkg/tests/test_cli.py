import subprocess
import sys

import numpy as np
import pytest

from twoway.bootstrap import empirical_quantile
from twoway.cli import main
from twoway.config import ConfigError, parse_config
from twoway.dgp import DgpSpec
from twoway.diagnostics import normality_stats
from twoway.experiments import GridCellSummary
from twoway.output import GRID_HEADER, emit_grid_csv, emit_qq_csv, format_real

QQ_CONFIG = """
command = "qq"
seed = 11
replications = 200
[spec]
n_rows = 10
n_cols = 10
n_factors = 1
delta = 0.0
phi = 0.5
"""

GRID_CONFIG = """
command = "coverage-grid"
seed = 3
[grid]
deltas = [1.0, 0.0, 0.5]
js = [50, 1, 100]
phis = [0.5]
n_rows = 6
n_cols = 6
replications = 100
[bootstrap]
n_draws = 19
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestParseConfig:
    def test_minimal_qq(self):
        cfg = parse_config(QQ_CONFIG, env={})
        assert cfg.command == "qq"
        assert cfg.seed == 11
        assert cfg.replications == 200
        assert cfg.spec == DgpSpec(10, 10, 1, 0.0, 0.5)

    def test_zero_replications(self):
        with pytest.raises(ConfigError) as info:
            parse_config(QQ_CONFIG.replace("replications = 200", "replications = 0"), env={})
        assert info.value.field == "replications"

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config(QQ_CONFIG.replace("delta = 0.0", "delta_ = 0.0"), env={})
        assert "delta_" in str(info.value)

    def test_key_not_used_by_command(self):
        with pytest.raises(ConfigError, match="mc_draws"):
            parse_config(QQ_CONFIG.replace("seed = 11", "seed = 11\nmc_draws = 5000"), env={})

    def test_seed_precedence(self):
        assert parse_config(QQ_CONFIG, env={"TWOWAY_SEED": "99"}).seed == 99
        assert parse_config(QQ_CONFIG, seed=5, env={"TWOWAY_SEED": "99"}).seed == 5
        assert parse_config(QQ_CONFIG, env={}).seed == 11

    def test_bad_env_seed(self):
        with pytest.raises(ConfigError, match="TWOWAY_SEED"):
            parse_config(QQ_CONFIG, env={"TWOWAY_SEED": "abc"})

    def test_command_mismatch(self):
        with pytest.raises(ConfigError, match="command"):
            parse_config(QQ_CONFIG, command="diagnose", env={})

    def test_grid(self):
        cfg = parse_config(GRID_CONFIG, env={})
        assert cfg.grid.master_seed == 3
        assert cfg.grid.bootstrap.n_draws == 19
        assert len(cfg.grid.cells()) == 9

    def test_syntax_error(self):
        with pytest.raises(ConfigError, match="parse error"):
            parse_config("command = \n", env={})


def _summary(delta, j, phi):
    return GridCellSummary(delta, j, phi, 0.9, 0.95, 1.0, 1.1, 0.0, 0.02, 100, 0.03)


class TestEmitters:
    def test_one_cell_two_lines(self, tmp_path):
        path = tmp_path / "g.csv"
        emit_grid_csv([_summary(0.0, 1, 0.5)], str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == GRID_HEADER and len(lines) == 2

    def test_ordering_and_rerun(self, tmp_path):
        cells = [_summary(d, j, 0.5) for d in (1.0, 0.0, 0.5) for j in (100, 1, 50)]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_grid_csv(cells, str(a))
        emit_grid_csv(cells, str(b))
        assert a.read_bytes() == b.read_bytes()
        rows = [line.split(",") for line in a.read_text().splitlines()[1:]]
        assert len(rows) == 9
        keys = [(float(r[0]), int(r[1]), float(r[2])) for r in rows]
        assert keys == sorted(keys)

    def test_qq_csv(self, tmp_path, rng):
        x = rng.normal(size=500)
        stats = normality_stats(x)
        path = tmp_path / "qq.csv"
        emit_qq_csv(stats, str(path), precision="full")
        lines = path.read_text().splitlines()
        assert len(lines) == 201
        assert lines[0] == "p,theoretical,sample" and lines[-1].startswith("# ks=")
        body = np.array([[float(v) for v in line.split(",")] for line in lines[1:-1]])
        assert body.shape == (199, 3)
        assert np.all(np.diff(body[:, 1]) > 0)
        z = (x - x.mean()) / x.std(ddof=1)
        assert np.allclose(body[:, 2], empirical_quantile(z, body[:, 0]), atol=1e-12)

    def test_format_real(self):
        assert format_real(0.123456789) == "0.123457"
        assert format_real(0.1, "full") == "0.1"
        with pytest.raises(ValueError):
            format_real(1.0, "3")


class TestMain:
    def test_qq(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("TWOWAY_SEED", raising=False)
        cfg = write(tmp_path, "qq.toml", QQ_CONFIG)
        assert main(["qq", "--config", cfg]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 201 and lines[-1].startswith("# ks=")

    def test_grid_workers_byte_identical(self, tmp_path, monkeypatch):
        monkeypatch.delenv("TWOWAY_SEED", raising=False)
        cfg = write(tmp_path, "g.toml", GRID_CONFIG)
        out1, out4 = tmp_path / "w1.csv", tmp_path / "w4.csv"
        assert main(["coverage-grid", "--config", cfg, "--output", str(out1)]) == 0
        assert main(["coverage-grid", "--config", cfg, "--output", str(out4), "--workers", "4"]) == 0
        assert out1.read_bytes() == out4.read_bytes()
        assert len(out1.read_text().splitlines()) == 10

    def test_seed_precedence_end_to_end(self, tmp_path, monkeypatch):
        cfg = write(tmp_path, "g.toml", GRID_CONFIG.replace("deltas = [1.0, 0.0, 0.5]", "deltas = [0.5]").replace("js = [50, 1, 100]", "js = [1]"))
        a, b, c = (tmp_path / f"{k}.csv" for k in "abc")
        monkeypatch.delenv("TWOWAY_SEED", raising=False)
        main(["coverage-grid", "--config", cfg, "--output", str(a)])
        monkeypatch.setenv("TWOWAY_SEED", "3")
        main(["coverage-grid", "--config", cfg, "--output", str(b)])
        monkeypatch.setenv("TWOWAY_SEED", "4")
        main(["coverage-grid", "--config", cfg, "--output", str(c), "--seed", "3"])
        assert a.read_bytes() == b.read_bytes() == c.read_bytes()

    def test_simulate_and_bootstrap_ci(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("TWOWAY_SEED", raising=False)
        cfg = write(tmp_path, "s.toml", 'command = "simulate"\nseed = 1\n[spec]\nn_rows = 4\nn_cols = 5\n')
        panel = tmp_path / "panel.csv"
        assert main(["simulate", "--config", cfg, "--output", str(panel)]) == 0
        data = np.loadtxt(panel, delimiter=",")
        assert data.shape == (4, 5)
        assert main(["bootstrap-ci", "--panel", str(panel), "--seed", "2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("method,") and lines[1].startswith("TWCR,") and lines[2].startswith("Bootstrap,")
        assert float(lines[1].split(",")[1]) == pytest.approx(data.mean(), rel=1e-5)

    def test_diagnose(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("TWOWAY_SEED", raising=False)
        cfg = write(tmp_path, "d.toml", 'command = "diagnose"\nseed = 1\nmc_draws = 2000\n[spec]\nn_rows = 10\nn_cols = 10\nn_factors = 4\n')
        assert main(["diagnose", "--config", cfg]) == 0
        lines = capsys.readouterr().out.splitlines()
        header = lines[0].split(",")
        closed = dict(zip(header, lines[2].split(",")))
        assert closed["source"] == "closed_form"
        assert float(closed["hall_ratio"]) == pytest.approx(0.25)
        assert float(closed["eigen_ratio"]) == pytest.approx(0.25)

    @pytest.mark.parametrize(
        "argv,expected",
        [
            (["--nondegenerate-assumed", "--no-sparse-network", "--very-few-factors"], "verdict=TwcrValid gate=nondegenerate"),
            (["--no-nondegenerate-assumed", "--sparse-network", "--very-few-factors"], "verdict=TwcrValid gate=sparse_network"),
            (["--no-nondegenerate-assumed", "--no-sparse-network", "--very-few-factors"], "verdict=TwcrNotValid gate=very_few_factors"),
            (["--no-nondegenerate-assumed", "--no-sparse-network", "--no-very-few-factors"], "verdict=TwcrValid gate=many_factors"),
            (["--j-small", "--alpha0-degenerate", "--gamma0-degenerate", "--eps-degenerate"], "table=CannotUse"),
        ],
    )
    def test_decide_flags(self, argv, expected, capsys):
        assert main(["decide", *argv]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert out == [expected]

    def test_decide_from_spec(self, tmp_path, capsys):
        cfg = write(tmp_path, "d.toml", 'command = "decide"\n[spec]\nn_rows = 50\nn_cols = 50\nn_factors = 1\ndelta = 0.0\nphi = 0.0\n')
        assert main(["decide", "--config", cfg]) == 0
        assert capsys.readouterr().out.strip() == "verdict=TwcrNotValid gate=very_few_factors table=CannotUse"

    def test_config_error_exit(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("TWOWAY_SEED", raising=False)
        cfg = write(tmp_path, "bad.toml", QQ_CONFIG.replace("replications = 200", "replications = 0"))
        assert main(["qq", "--config", cfg]) == 2
        err = capsys.readouterr().err.strip().splitlines()
        assert err == ["twoway: error[config]: replications: must be >= 100, got 0"]

    def test_runtime_error_exit(self, tmp_path, capsys):
        panel = tmp_path / "p.csv"
        panel.write_text("1,2,3\n")
        assert main(["bootstrap-ci", "--panel", str(panel), "--seed", "1"]) == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("twoway: error[ValueError]: ") and "\n" not in err

    def test_missing_panel_file(self, tmp_path, capsys):
        assert main(["bootstrap-ci", "--panel", str(tmp_path / "nope.csv"), "--seed", "1"]) != 0
        assert capsys.readouterr().err.startswith("twoway: error[")

    def test_decide_without_inputs(self, capsys):
        assert main(["decide"]) == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "twoway.cli", "decide", "--no-nondegenerate-assumed", "--no-sparse-network", "--no-very-few-factors"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "verdict=TwcrValid gate=many_factors"


@pytest.mark.parametrize("name", ["qq_grid", "coverage_phi", "coverage_delta", "diagnose", "decide"])
def test_shipped_configs_parse(name):
    from pathlib import Path

    text = (Path(__file__).resolve().parents[1] / "configs" / f"{name}.toml").read_text()
    assert parse_config(text, env={}).command in ("qq", "coverage-grid", "diagnose", "decide")
