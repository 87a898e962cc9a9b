import csv
import io
import json
import subprocess
import sys

import pytest

from superreflex.cli import main, parse_range


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_range():
    assert parse_range("4") == [4]
    assert parse_range("2..5") == [2, 3, 4, 5]


@pytest.mark.parametrize("argv", [
    ["jn", "--space", "lp:0.5:2", "--n", "2"],
    ["jn", "--space", "lp:2:1", "--n", "5..2"],
    ["sn", "--space", "lp:2:2"],
    ["bogus"],
])
def test_usage_errors_exit_one(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1
    assert "error" in capsys.readouterr().err


def test_jn_certify_real_line(capsys):
    code, out, _ = run(capsys, "jn", "--space", "lp:2:1", "--n", "2..5", "--certify")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["n"]) for r in rows] == [2, 3, 4, 5]
    for r in rows:
        n = int(r["n"])
        assert float(r["J_lo"]) <= 1 - 1 / n <= float(r["J_hi"])
        assert float(r["J_upper"]) == pytest.approx(1 - 1 / n, abs=1e-6)


def test_jn_linf(capsys):
    code, out, _ = run(capsys, "jn", "--space", "lp:inf:8", "--n", "4", "--format", "json")
    assert code == 0
    (row,) = json.loads(out)
    assert row["J_upper"] == pytest.approx(0.0, abs=1e-12)


def test_jn_budget_exit_three(capsys):
    code, _, err = run(capsys, "jn", "--space", "lp:2:3", "--n", "4", "--certify",
                       "--step", "0.01", "--budget", "1e6", "--restarts", "1", "--iters", "5")
    assert code == 3 and "budget" in err


def test_sn(capsys):
    code, out, _ = run(capsys, "sn", "--space", "lp:1:6", "--n", "6")
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and float(row["sigma_best"]) == 1.0 and float(row["defect"]) == 0.0
    code, out, _ = run(capsys, "sn", "--space", "lp:2:4", "--n", "2", "--restarts", "2")
    (row,) = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and float(row["sigma_best"]) <= 1.693
    code, _, err = run(capsys, "sn", "--n", "8", "--space", "lp:1:4")
    assert code == 1 and "error" in err


def test_thm1(capsys):
    code, out, _ = run(capsys, "thm1", "--n", "3")
    rep = json.loads(out)
    assert code == 0 and rep["sigma"] == 1.0 and rep["band"] == 0.0
    code, out, _ = run(capsys, "thm1", "--n", "3", "--eps", "1e-4")
    rep = json.loads(out)
    assert code == 0 and rep["sigma"] <= 1 + 18e-4 and rep["sigma"] <= rep["sigma_budget"] + 1e-6


def test_thm1_precondition_and_witness_file(tmp_path, capsys):
    w = {"space": "lp:inf:3", "n": 3, "z": [[-0.5, 0.5, 0.5], [-0.5, -0.5, 0.5], [-0.5, -0.5, -0.5]]}
    path = tmp_path / "w.json"
    path.write_text(json.dumps(w))
    code, _, err = run(capsys, "thm1", "--witness", str(path))
    assert code == 1 and "exceeds" in err


def test_thm2(capsys):
    code, out, _ = run(capsys, "thm2", "--space", "lp:inf:21", "--n", "2", "--eps", "0.5")
    rep = json.loads(out)
    assert code == 0 and rep["m"] == 5 and rep["witness"]["margin"] >= 0.5 - 1e-4
    code, _, err = run(capsys, "thm2", "--space", "lp:inf:20")
    assert code == 1 and "ground set too small" in err


def test_thm2_needs_input(capsys):
    code, _, _ = run(capsys, "thm2")
    assert code == 1


def test_ramsey(capsys):
    code, out, _ = run(capsys, "ramsey", "tower", "--g", "3", "--m", "3")
    assert code == 0 and json.loads(out)["value"] == "P_1(256)"
    _, out, _ = run(capsys, "ramsey", "tower", "--g", "2", "--m", "2")
    assert json.loads(out)["value"] == "16"
    _, out, _ = run(capsys, "ramsey", "bound", "--k", "1", "--l", "3")
    assert json.loads(out)["bound"] == "64"
    _, out, _ = run(capsys, "ramsey", "nbound", "--n", "2", "--eps", "0.5")
    assert json.loads(out)["m"] == 5
    _, out, _ = run(capsys, "ramsey", "demo", "--coloring", "pentagon", "--N", "5")
    assert json.loads(out)["found"] is False
    _, out, _ = run(capsys, "ramsey", "demo", "--coloring", "constant", "--N", "8")
    assert json.loads(out)["subset"] == [1, 2, 3]


def test_deterministic_files(tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"out{i}.csv"
        assert main(["jn", "--space", "lp:3:3", "--n", "2..3", "--seed", "7",
                     "--restarts", "2", "--iters", "30", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] and outs[0].startswith(b"space,n,")
    outs = []
    for i in range(2):
        path = tmp_path / f"demo{i}.json"
        main(["ramsey", "demo", "--seed", "4", "--N", "7", "--out", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "superreflex", "ramsey", "tower", "--g", "0", "--m", "5"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["value"] == "5"
