import json
import shutil
import subprocess
import sys

import pytest

from matherkit import cli

SMALL = ["--nx", "64", "--nv", "33"]


@pytest.fixture
def free_cfg(tmp_path):
    p = tmp_path / "free.json"
    p.write_text(json.dumps({"lagrangian": {"mass": 1.0, "potential": {"kind": "fourier", "coefficients": [[0.0, 0.0]]}},
                             "sets": {"mane_horizon": 5.0, "mane_v_refine": 1}}))
    return p


@pytest.fixture
def pendulum_cfg(tmp_path):
    p = tmp_path / "pend.json"
    p.write_text(json.dumps({"mass": 1.0, "potential": {"kind": "fourier",
                                                        "coefficients": [[-1.0, 0.0], [1.0, 0.0]]},
                             "sets": {"mane_horizon": 5.0, "mane_v_refine": 1}}))
    return p


def test_usage_errors(tmp_path, free_cfg, capsys):
    assert cli.run([]) == 1
    assert cli.run(["bogus"]) == 1
    assert cli.run(["alpha", "--c", "0"]) == 1
    assert cli.run(["alpha", "--config", str(tmp_path / "missing.json"), "--c", "0"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert cli.run(["alpha", "--config", str(bad), "--c", "0"]) == 1
    assert cli.run(["alpha", "--config", str(free_cfg), "--c", "0", "--eps-pot", "-1"]) == 1
    assert cli.run(["scan", "--config", str(free_cfg), "--c-range", "0:1"]) == 1
    assert "error" in capsys.readouterr().err


def test_alpha_both(free_cfg, tmp_path):
    out = tmp_path / "a.json"
    mcsv = tmp_path / "m.csv"
    code = cli.run(["alpha", "--config", str(free_cfg), "--c", "1", *SMALL,
                    "--out", str(out), "--measure-csv", str(mcsv)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["config"]["grid"]["nx"] == 64
    assert doc["config"]["lagrangian"]["mass"] == 1.0
    assert mcsv.read_text().startswith("x,v,weight")
    assert doc["reports"]["lax_oleinik"]["alpha"] == pytest.approx(0.5, abs=2e-2)
    assert doc["reports"]["lp"]["alpha"] == pytest.approx(doc["reports"]["lax_oleinik"]["alpha"], abs=5e-3)


def test_config_precedence(pendulum_cfg):
    parser = cli.build_parser()
    args = parser.parse_args(["alpha", "--config", str(pendulum_cfg), "--c", "0", "--tau", "0.1"])
    cfg = cli.load_config(args)
    assert cfg.grid.tau == 0.1
    assert cfg.grid.nx == 256
    assert cfg.sets["mane_horizon"] == 5.0
    assert cfg.seed == 0


def test_sets_outputs(pendulum_cfg, tmp_path):
    out = tmp_path / "sets"
    assert cli.run(["sets", "--config", str(pendulum_cfg), "--c", "0", *SMALL, "--out", str(out)]) == 0
    for name in ("mather.csv", "aubry.csv", "mane.csv", "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["d_H_MA"] == 0.0
    assert summary["sizes"]["aubry"] >= 1
    assert set(summary["tolerances"]) >= {"eps_pot", "mane_epsilon"}


def test_potential_table(free_cfg, tmp_path):
    out = tmp_path / "phi.csv"
    assert cli.run(["potential", "--config", str(free_cfg), "--c", "0", "--kind", "barrier",
                    *SMALL, "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "i,j,x_i,x_j,value"
    assert len(lines) == 1 + 64 * 64
    assert json.loads(out.with_suffix(".json").read_text())["kind"] == "barrier"


def test_scan_negative_range_and_determinism(free_cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert cli.run(["scan", "--config", str(free_cfg), "--c-range", "-1:0:2", *SMALL,
                        "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().split("\n")[1].startswith("-1,")


def test_beta(free_cfg, capsys):
    assert cli.run(["beta", "--config", str(free_cfg), "--h", "1", "--c-range", "-2:2:9", *SMALL]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["beta"] == pytest.approx(0.5, abs=2e-2)


def test_threads_env_error(free_cfg, monkeypatch):
    monkeypatch.setenv("MATHERKIT_THREADS", "lots")
    assert cli.run(["alpha", "--config", str(free_cfg), "--c", "0", *SMALL]) == 1


@pytest.mark.skipif(shutil.which("matherkit") is None, reason="console script not installed")
def test_console_script(free_cfg):
    proc = subprocess.run(["matherkit", "alpha", "--config", str(free_cfg), "--c", "0",
                           "--method", "lax", *SMALL], capture_output=True, text=True)
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["alpha"] == 0.0
    assert list(doc["reports"]) == ["lax_oleinik"]


def test_module_entry_point(free_cfg):
    proc = subprocess.run([sys.executable, "-m", "matherkit.cli", "nope"], capture_output=True, text=True)
    assert proc.returncode == 1
