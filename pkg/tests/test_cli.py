import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qhack import cli
from oracles import swap


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_network(path, u, da, db, **extra):
    doc = {"d_a": da, "d_b": db, "re": np.real(u).tolist(), "im": np.imag(u).tolist(), **extra}
    path.write_text(json.dumps(doc))
    return str(path)


def test_theory(capsys):
    code, out, _ = run(capsys, "theory", "--da", "16", "--db", "16")
    doc = json.loads(out)
    i1 = 8 / (3 * math.pi)
    assert code == 0
    assert doc["avg_p_opt"] == pytest.approx(i1**2 + (1 - i1**2) / 256, abs=1e-12)
    assert doc["i_kappa"] == pytest.approx(0.848826, abs=1e-6)
    assert doc["i_kappa_approx"] == 0.875


@pytest.mark.parametrize("strategy", ["me", "pg", "opt", "rand"])
def test_eval_deterministic(capsys, strategy):
    args = ["eval", "--da", "2", "--db", "3", "--seed", "5", "--strategy", strategy]
    a = run(capsys, *args)
    b = run(capsys, *args)
    assert a[0] == 0 and a == b
    assert 0 < json.loads(a[1])["p_hack"] <= 1


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("QHACK_SEED", "5")
    from_env = run(capsys, "eval", "--da", "2", "--db", "2", "--strategy", "me")[1]
    monkeypatch.delenv("QHACK_SEED")
    explicit = run(capsys, "eval", "--da", "2", "--db", "2", "--strategy", "me", "--seed", "5")[1]
    other = run(capsys, "eval", "--da", "2", "--db", "2", "--strategy", "me")[1]
    assert from_env == explicit != other


def test_bad_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("QHACK_SEED", "abc")
    code, _, err = run(capsys, "eval", "--da", "2", "--db", "2")
    assert code == 1 and "QHACK_SEED" in err


def test_unitary_file(capsys, tmp_path):
    path = write_network(tmp_path / "swap.json", swap(2), 2, 2)
    code, out, _ = run(capsys, "eval", "--unitary", path, "--strategy", "me")
    assert code == 0 and json.loads(out)["p_hack"] == pytest.approx(1.0)


def test_optimize_trace(capsys, tmp_path):
    out_path = tmp_path / "opt.json"
    code, out, _ = run(capsys, "optimize", "--da", "2", "--db", "3", "--restarts", "0", "--out", str(out_path))
    doc = json.loads(out_path.read_text())
    assert code == 0 and out == ""
    assert doc["converged"] and np.all(np.diff(doc["trace"]) >= 0)
    assert doc["trace"][-1] == pytest.approx(doc["p_hack"], abs=1e-12)


def test_hp_swap(capsys, tmp_path):
    path = write_network(tmp_path / "swap.json", swap(2), 2, 2)
    code, out, _ = run(capsys, "hp", "--unitary", path)
    doc = json.loads(out)
    assert code == 0
    assert doc["p_hp_opt"] == pytest.approx(1.0) and abs(doc["difference"]) <= 1e-12


def test_verify_pass(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "bounds", "--trials", "50", "--seed", "7")
    assert code == 0 and json.loads(out)["passed"]


def test_verify_failure_exit_code(capsys):
    # small black-hole sample sits above the asymptotic value
    code, out, _ = run(capsys, "verify", "--suite", "blackhole", "--trials", "3", "--seed", "1")
    doc = json.loads(out)
    assert code == 2 and not doc["passed"]
    assert doc["assertions"][0]["counterexample"]["master_seed"] == 1


@pytest.mark.parametrize(
    "content,needle",
    [
        ("{not json", "malformed JSON"),
        ("[1, 2]", "top level"),
        ('{"d_a": 2, "re": []}', "missing keys"),
        ('{"d_a": 2, "d_b": 2, "re": [["x"]], "im": [[0]]}', "non-numeric"),
        ('{"d_a": 2, "d_b": 2, "re": [[1, 0], [0, 1]], "im": [[0, 0]]}', "equal shape"),
        ('{"d_a": 1, "d_b": 2, "re": [[1, 1], [0, 1]], "im": [[0, 0], [0, 0]]}', "unitary"),
        ('{"d_a": 2, "d_b": 2, "re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]}', ""),
    ],
)
def test_bad_unitary_files(capsys, tmp_path, content, needle):
    path = tmp_path / "u.json"
    path.write_text(content)
    code, out, err = run(capsys, "eval", "--unitary", str(path))
    assert code == 1 and out == ""
    assert needle in err and err.count("\n") == 1


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["eval", "--da", "2"],
        ["eval", "--da", "2", "--db", "2", "--strategy", "best"],
        ["eval", "--unitary", "/nonexistent/u.json"],
        ["theory", "--da", "0", "--db", "2"],
        ["optimize", "--da", "2", "--db", "2", "--eps", "-1"],
        ["verify", "--suite", "bounds", "--trials", "0"],
        ["hp", "--da", "2", "--db", "6", "--dk", "3", "--dl", "4"],
        ["sweep", "--config", "/nonexistent/c.json"],
    ],
)
def test_invalid_input_exit_one(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 1 and out == ""
    assert err.startswith("qhack: error:")


def test_sweep_config_errors(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"da_list": [3], "kappa": "1/2"}))
    code, _, err = run(capsys, "sweep", "--config", str(cfg))
    assert code == 1 and "not an integer" in err
    cfg.write_text(json.dumps({"da_list": [2]}))
    assert run(capsys, "sweep", "--config", str(cfg), "--threads", "0")[0] == 1


def test_sweep_threads_byte_identical(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"da_list": [2, 3], "trials": 6, "strategies": ["ME", "PG", "OPT", "RAND"]}))
    outs = []
    for threads in ("1", "8"):
        target = tmp_path / f"t{threads}.csv"
        code, out, _ = run(capsys, "sweep", "--config", str(cfg), "--out", str(target), "--threads", threads, "--seed", "3")
        assert code == 0 and json.loads(out)["rows"] == 48
        outs.append((target.read_bytes(), (tmp_path / f"t{threads}_agg.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_sweep_stdout(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"da_list": [2], "trials": 2, "master_seed": 4}))
    code, out, _ = run(capsys, "sweep", "--config", str(cfg))
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 2 and doc["config"]["master_seed"] == 4
    assert doc["aggregates"][0]["strategy"] == "OPT"


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qhack.cli", "theory", "--da", "2", "--db", "4"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["kappa"] == 2.0
