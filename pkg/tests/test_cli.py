import json
import subprocess
import sys

import pytest

from plapshoot import cli
from plapshoot.catalog import ENV_VAR
from plapshoot.cli import EXIT_CERT, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from plapshoot.integrator import IntegrationError

CI2 = "params:\n  p: 2\n  N: 4\n  m: 0.5\n  l: 3\n  alpha: 5.5\n"


@pytest.fixture
def cfg(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "catalog"))

    def write(text=CI2, name="run.yaml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


def test_validate_ok(cfg, capsys):
    assert main(["validate", cfg()]) == EXIT_OK
    assert "accepted" in capsys.readouterr().out


def test_validate_rejects_with_clause(cfg, capsys):
    assert main(["validate", cfg(CI2.replace("5.5", "6"))]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "rejected" in err and "rK'/K" in err


def test_unknown_key_exit_code(cfg, capsys):
    assert main(["validate", cfg(CI2 + "  alpha2: 5\n")]) == EXIT_CONFIG
    assert ":7:3: unknown key 'alpha2'" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG


def test_shoot_writes_outputs(cfg, tmp_path, capsys):
    out = tmp_path / "shot"
    assert main(["shoot", cfg(), "--a", "40", "--reference", "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "shoot.json").read_text())
    assert data["n"] == 1 and data["reference"]["rel_diff"] < 1e-8
    assert (out / "trajectory.csv").read_text().startswith("t,v,q,vprime,r,u,uprime\n")
    assert "interior zeros" in capsys.readouterr().out


def test_solve_and_convert(cfg, tmp_path):
    out = tmp_path / "solve"
    assert main(["solve", cfg(), "--n-max", "n0+1", "--out", str(out)]) == EXIT_OK
    lad = json.loads((out / "ladder.json").read_text())
    assert [e["n"] for e in lad["entries"]] == [0, 1]
    assert all(e["certified"] and e["r_domain_checks"]["passed"] for e in lad["entries"])
    assert lad["entries"][0]["a_n"] == pytest.approx(18.5066354435, rel=1e-9)
    assert (tmp_path / "catalog" / "index.json").exists()
    conv = tmp_path / "conv"
    rc = main(["convert", cfg(), "--ladder", str(out / "ladder.json"), "--out", str(conv)])
    assert rc == EXIT_OK
    assert (conv / "profile_n1.csv").read_bytes() == (out / "profile_n1.csv").read_bytes()
    checks = json.loads((conv / "convert_checks.json").read_text())
    assert checks["1"]["sign_changes"] == 1


def test_solve_bad_n_max(cfg):
    assert main(["solve", cfg(), "--n-max", "lots", "--no-catalog"]) == EXIT_CONFIG


def test_solve_certification_failure(cfg, tmp_path):
    text = CI2 + "tolerances:\n  tol_match: 1e-15\n  tol_a: 1e-4\n"
    rc = main(["solve", cfg(text), "--n-max", "1", "--no-catalog", "--out", str(tmp_path / "x")])
    assert rc == EXIT_CERT


def test_runtime_error_exit_code(cfg, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise IntegrationError("step size underflow")
    monkeypatch.setattr(cli, "classify", boom)
    assert main(["shoot", cfg(), "--a", "3"]) == EXIT_RUNTIME
    assert "step size underflow" in capsys.readouterr().err


def test_sweep_small(cfg, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", cfg(), "--a1", "32", "--doublings", "6", "--out", str(out)]) == EXIT_OK
    data = json.loads((out / "sweep.json").read_text())
    assert len(data["rows"]) == 7 and data["limit_gap"]["passed"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "plapshoot", "--version"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.startswith("plapshoot ")
