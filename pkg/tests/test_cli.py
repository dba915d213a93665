import json
import subprocess
import sys

import pytest

from apwl1.cli import main

INI = """
[experiment]
n_iters = 40
n_trials = 3
seed = 1

[scenario]
L = 16
S = 2
kind = sysid
noise_var = 0.01

[algorithm:apwl1]
kind = apwl1
q = 4

[algorithm:za]
kind = zalms
mu = 0.02
rho = 1e-4
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "exp.ini"
    p.write_text(INI)
    return p


def test_run_writes_outputs(cfg_file, tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["run", "--config", str(cfg_file), "--out", str(out), "--trials", "2"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["status"] == "ok" and summary["n_trials"] == 2
    assert (out / "mse.csv").exists() and (out / "mse.json").exists()


def test_run_twice_byte_identical(cfg_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg_file), "--out", str(a), "--seed", "5"]) == 0
    assert main(["run", "--config", str(cfg_file), "--out", str(b), "--seed", "5"]) == 0
    assert (a / "mse.csv").read_bytes() == (b / "mse.csv").read_bytes()


def test_sweep_negative_deviations(cfg_file, tmp_path, capsys):
    rc = main(["sweep", "--config", str(cfg_file), "--param", "delta",
               "--deviations", "-0.1,0,0.5,1.0", "--out", str(tmp_path)])
    assert rc == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert [r["deviation"] for r in rows] == [-0.1, 0.0, 0.5, 1.0]
    assert (tmp_path / "sweep_delta.csv").exists()


def test_verify_small(capsys):
    assert main(["verify", "--cases", "50", "--seeds", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "ok" and all(r["passed"] for r in out["reports"])


@pytest.mark.parametrize("argv", [
    ["run"],
    ["bogus"],
    ["run", "--config", "/nonexistent.ini"],
    ["sweep", "--config", "x.ini", "--param", "delta", "--deviations", "a,b"],
])
def test_errors_are_json(argv, capsys):
    assert main(argv) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["status"] == "error" and err["exit_code"] == 2


def test_bad_config_content(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[scenario]\nL = 4\nS = 9\n")
    assert main(["run", "--config", str(p)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_module_entry_point(cfg_file, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "apwl1", "run", "--config", str(cfg_file),
                           "--out", str(tmp_path / "m"), "--trials", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["status"] == "ok"
