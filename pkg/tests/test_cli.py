import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from weinorman.cli import coefficient_texts, load_config, main

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_structure_b2_blocks(capsys):
    code, out, _ = run(capsys, "structure", "--algebra", "B", "--rank", "2")
    assert code == 0
    assert "dimension 10" in out
    sizes = [int(line.split()[2]) for line in out.splitlines()
             if line.startswith("  ") and " size " in line]
    assert sizes == [3, 1, 2, 1, 3]
    assert "FAIL" not in out


def test_structure_c4_first_block(capsys):
    code, out, _ = run(capsys, "structure", "--algebra", "C", "--rank", "4", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    first = doc["blocks"][0]
    assert first["name"] == "a1+" and first["size"] == 10
    assert first["labels"] == list(range(1, 11))


def test_structure_g2_decomposition(capsys):
    code, out, _ = run(capsys, "structure", "--algebra", "g2")
    assert code == 0
    low = out.lower()
    assert "n+" in out and "n-" in out and " h " in out
    assert "fail piece 2 commutative" in low and "fail piece 1 ideal in n+" in low
    assert "not a commuting decomposition" in low
    assert "surviving split: n+ + h + n-" in out


def test_equations_counts(capsys):
    code, out, _ = run(capsys, "equations", "--algebra", "A", "--rank", "1")
    assert code == 0
    assert sum(1 for line in out.splitlines() if "' = " in line) == 3
    assert "riccati" in out and "quadrature" in out
    code, out, _ = run(capsys, "equations", "--algebra", "B", "--rank", "2")
    assert out == (GOLDEN / "b2_equations.txt").read_text()
    assert out.count("# stage") == 5


def test_equations_g2_machine_degree(capsys):
    code, out, err = run(capsys, "equations", "--algebra", "G2", "--format", "machine")
    assert code == 0
    doc = json.loads(out)
    assert doc["algebra"] == "G2"
    assert doc["stages"][0]["total_degree"] == 4 and doc["stages"][0]["flags"]


def test_equations_latex_groups_by_stage(capsys, tmp_path):
    out_path = tmp_path / "b2.tex"
    code, out, _ = run(capsys, "equations", "--algebra", "B", "--rank", "2", "--format", "latex",
                       "-o", str(out_path))
    assert code == 0 and out == ""
    assert out_path.read_text().count("\\begin{align*}") == 5


@pytest.mark.parametrize("argv", [
    [],
    ["structure"],
    ["structure", "--algebra", "B"],
    ["structure", "--algebra", "B", "--rank", "1"],
    ["structure", "--algebra", "E", "--rank", "6"],
    ["equations", "--algebra", "A", "--rank", "2", "--format", "csv"],
    ["solve", "--config", "/nonexistent/run.yaml"],
    ["verify", "--algebra", "A", "--rank", "2", "--trials", "0"],
])
def test_usage_errors_exit_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err


def test_bad_coefficient_reports_position(capsys, tmp_path):
    cfg = write_config(tmp_path, "algebra: {family: A, rank: 1}\ncoefficients: ['sin(t', '0', '0']\n")
    code, _, err = run(capsys, "solve", "--config", cfg)
    assert code == 1
    assert "a1" in err and "column 6" in err and "^" in err


def test_bad_config_values(capsys, tmp_path):
    cfg = write_config(tmp_path, "algebra: {family: A, rank: 1}\ntspan: {t0: 1, t1: 0}\n")
    assert run(capsys, "solve", "--config", cfg)[0] == 1
    cfg = write_config(tmp_path, "algebra: {family: A, rank: 1}\ncoefficients: ['0', '0', '0', '0']\n")
    assert run(capsys, "solve", "--config", cfg)[0] == 1
    cfg = write_config(tmp_path, "algebra: [oops\n")
    assert run(capsys, "solve", "--config", cfg)[0] == 1


def test_solve_zero_coefficients(capsys):
    code, out, err = run(capsys, "solve", "--algebra", "B", "--rank", "2")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t," + ",".join(f"u{i}" for i in range(1, 11))
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    assert np.all(data[:, 1:] == 0)
    assert "solve ok" in err


def test_solve_single_generator_quadrature(capsys, tmp_path):
    cfg = write_config(tmp_path, "algebra: {family: A, rank: 1}\ncoefficients: {a1: 'sin(t)'}\n"
                       "tspan: {t0: 0, t1: 2}\noutput: {points: 41}\n")
    code, out, _ = run(capsys, "solve", "--config", cfg)
    assert code == 0
    data = np.array([[float(x) for x in line.split(",")] for line in out.splitlines()[1:]])
    assert data.shape == (41, 4)
    assert np.abs(data[:, 1] - (1 - np.cos(data[:, 0]))).max() < 5e-8
    assert np.all(data[:, 2:] == 0)
    tight = write_config(tmp_path, "algebra: {family: A, rank: 1}\ncoefficients: {a1: 'sin(t)'}\n"
                         "tspan: {t0: 0, t1: 2}\nsolver: {rtol: 1.0e-12, atol: 1.0e-12}\n", "tight.yaml")
    code, out, _ = run(capsys, "solve", "--config", tight)
    data = np.array([[float(x) for x in line.split(",")] for line in out.splitlines()[1:]])
    assert np.abs(data[:, 1] - (1 - np.cos(data[:, 0]))).max() < 1e-9


def test_solve_demo_config_reports_oracle_error(capsys):
    code, out, err = run(capsys, "solve", "--config", str(ROOT / "configs" / "b2_demo.yaml"))
    assert code == 0
    line = next(l for l in err.splitlines() if l.startswith("oracle max relative error"))
    assert float(line.split()[-1]) < 1e-6


def test_solve_numerical_failure_exit_2(capsys, tmp_path):
    text = "algebra: {family: A, rank: 1}\ncoefficients: ['1', '0', '-1']\ntspan: {t0: 0, t1: 2}\n"
    cfg = write_config(tmp_path, text)
    code, _, err = run(capsys, "solve", "--config", cfg)
    assert code == 2
    assert "t*=1.57" in err
    code, _, err = run(capsys, "solve", "--config", cfg, "--reanchor")
    assert code == 0 and "re-anchored at" in err


def test_solve_json_and_stride(capsys, tmp_path):
    cfg = write_config(tmp_path, "algebra: {family: C, rank: 3}\ncoefficients: {a2: '0.5', a13: 't'}\n"
                       "output: {format: json, stride: 10, K: true}\n")
    out_path = tmp_path / "traj.json"
    code, out, _ = run(capsys, "solve", "--config", cfg, "-o", str(out_path))
    assert code == 0 and out == ""
    doc = json.loads(out_path.read_text())
    assert doc["format"] == "weinorman-trajectory/1"
    assert len(doc["times"]) == 11 and len(doc["u"]) == 11
    assert np.asarray(doc["K"]).shape == (11, 6, 6)


def test_csv_is_deterministic(tmp_path):
    cfg = ROOT / "configs" / "b2_demo.yaml"
    outs = []
    for k in range(2):
        p = tmp_path / f"run{k}.csv"
        assert main(["solve", "--config", str(cfg), "-o", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_verify_b3(capsys):
    code, out, _ = run(capsys, "verify", "--algebra", "B", "--rank", "3", "--trials", "5")
    assert code == 0
    assert out.splitlines()[-1] == "verify B3: PASS"
    assert sum(1 for l in out.splitlines() if l.startswith("PASS [trial")) == 5


def test_verify_is_deterministic_and_parallel_safe(capsys):
    _, serial, _ = run(capsys, "verify", "--algebra", "A", "--rank", "2", "--trials", "3", "--jobs", "1")
    _, parallel, _ = run(capsys, "verify", "--algebra", "A", "--rank", "2", "--trials", "3", "--jobs", "3")
    assert serial == parallel


def test_verify_g2_expected_findings(capsys):
    code, out, _ = run(capsys, "verify", "--algebra", "G2", "--trials", "2", "--mode", "monolithic")
    assert code == 0
    assert "order exactly 4" in out and "total degree 4" in out
    assert out.splitlines()[-1] == "verify G2: PASS"


def test_verify_structure_only_a10(capsys):
    code, out, _ = run(capsys, "verify", "--algebra", "A", "--rank", "10", "--structure-only")
    assert code == 0
    assert "[trial" not in out and out.splitlines()[-1] == "verify A10: PASS"


def test_verify_failure_exit_3(capsys, tmp_path):
    cfg = write_config(tmp_path, "algebra: {family: A, rank: 1}\nverify: {trials: 1, tol: 1.0e-30}\n")
    code, out, _ = run(capsys, "verify", "--config", cfg)
    assert code == 3
    assert "FAIL [trial 0]" in out


def test_coefficient_texts():
    assert coefficient_texts(None, 3) == ["0", "0", "0"]
    assert coefficient_texts(["t"], 3) == ["t", "0", "0"]
    assert coefficient_texts({"a3": "t", 1: 2}, 3) == ["2", "0", "t"]
    with pytest.raises(Exception):
        coefficient_texts({"a4": "t"}, 3)


def test_config_defaults(tmp_path):
    cfg = load_config(None)
    assert cfg.t0 == 0 and cfg.t1 == 1 and cfg.mode == "staged" and not cfg.reanchor
    with pytest.raises(Exception):
        load_config(write_config(tmp_path, "solver: {unknown_key: 1}\n"))


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "weinorman", "equations", "--algebra", "A", "--rank", "1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "u1' = " in r.stdout
