import csv
import json
import subprocess
import sys

import pytest

from greensign.cli import main

LONO = {"n": 4, "sigma": [0, 1], "epsilon": [1, 3]}


@pytest.fixture
def spec_file(tmp_path):
    def write(data, name="spec.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data) if not isinstance(data, str) else data)
        return str(path)
    return write


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_analyze(spec_file, capsys):
    code, out, err = run(["analyze", "--spec", spec_file({"n": 4, "sigma": [1, 3], "epsilon": [0, 1]})], capsys)
    assert code == 0 and out["N_a"] is True
    row = out["derivatives"][0]
    assert (row["q"], row["z"], row["h"]) == (1, 2, 1)
    assert "N_a=True" in err


def test_analyze_clamped(spec_file, capsys):
    code, out, _ = run(["analyze", "--spec", spec_file({"n": 4, "sigma": [0, 1, 2], "epsilon": [2]})], capsys)
    assert out["adjoint"] == {"n": 4, "sigma": [0], "epsilon": [0, 2, 3]}
    assert (out["alpha"], out["beta"], out["eta"], out["gamma"]) == (3, 0, 1, 1)


def test_duplicate_sigma_is_usage_error(spec_file, capsys):
    code, out, err = run(["analyze", "--spec", spec_file({"n": 4, "sigma": [0, 0], "epsilon": [1, 3]})], capsys)
    assert code == 2 and out["field"] == "sigma"
    assert "sigma" in err


def test_unknown_key_rejected(spec_file, capsys):
    code, out, _ = run(["analyze", "--spec", spec_file(dict(LONO, colour="blue"))], capsys)
    assert code == 2 and out["field"] == "colour"


def test_parse_error_has_position(spec_file, capsys):
    code, out, _ = run(["analyze", "--spec", spec_file('{"n": 4,\n "sigma": [0 1]}')], capsys)
    assert code == 2 and ":2:" in out["error"]


def test_missing_flag_is_usage_error(spec_file, capsys):
    code, out, _ = run(["interval", "--spec", spec_file(LONO)], capsys)
    assert code == 2 and out["field"] == "q"
    assert main(["bogus"]) == 2
    capsys.readouterr()


def test_interval(spec_file, capsys):
    code, out, _ = run(["interval", "--spec", spec_file(LONO), "--q", "1"], capsys)
    assert code == 0
    iv = out["interval"]
    assert iv["lower"] == pytest.approx(-(2.36502037**4), rel=1e-7) and iv["lower_open"]
    assert iv["upper"] == pytest.approx(2.22144147**4, rel=1e-7) and not iv["upper_open"]
    assert [p["name"] for p in out["provenance"]] == ["lambda_1", "lambda_2^q", "lambda_4^q"]


def test_verify(spec_file, capsys):
    path = spec_file(LONO)
    code, out, _ = run(["verify", "--spec", path, "--q", "1", "--M", "0", "--grid", "101"], capsys)
    assert code == 0 and out["verdict"] == "StrictSignConfirmed"
    code, out, _ = run(["verify", "--spec", path, "--q", "1", "--M", "30"], capsys)
    assert code == 1 and out["verdict"] == "SignViolated"


def test_green_eval_and_dump(spec_file, capsys, tmp_path):
    dump = tmp_path / "g.csv"
    code, out, _ = run(["green", "--spec", spec_file(LONO), "--M", "0", "--eval", "0.5,0.25",
                        "--dump", str(dump), "--grid", "4", "--verify"], capsys)
    assert code == 0
    assert out["value"] == pytest.approx(0.0091145833333, abs=1e-12)
    assert out["verification"]["passed"]
    rows = list(csv.reader(open(dump)))
    assert rows[0] == ["t", "s", "g", "dg1", "dg2", "dg3"] and len(rows) == 17


def test_green_at_eigenvalue(spec_file, capsys):
    code, out, _ = run(["green", "--spec", spec_file(LONO), "--M", "-31.28524385877522", "--eval", "0.5,0.2"], capsys)
    assert code == 1 and out["kind"] == "EigenvalueCollisionError"


def test_eigen(spec_file, capsys):
    path = spec_file(LONO)
    code, out, _ = run(["eigen", "--spec", path, "--direction", "FirstNegative"], capsys)
    assert code == 0 and set(out) >= {"lambda", "m", "residual", "bracket_m"}
    assert out["m"] == pytest.approx(2.3650203724, abs=1e-9)
    code, out, _ = run(["eigen", "--spec", path, "--direction", "FirstPositive"], capsys)
    assert code == 1 and out["found"] is False and out["granularity_m"] == pytest.approx(0.01)


def test_sweep_with_negative_values(spec_file, capsys, tmp_path):
    table = tmp_path / "sweep.csv"
    code, out, _ = run(["sweep", "--spec", spec_file(LONO), "--q", "1", "--Ms", "-30,0,20",
                        "--grid", "41", "--csv", str(table)], capsys)
    assert code == 0 and out["monotonicity"]["holds"]
    rows = list(csv.reader(open(table)))
    assert rows[0] == ["M", "min", "max", "verdict"] and len(rows) == 4


def test_cone_and_solve(spec_file, capsys, tmp_path):
    path = spec_file(dict(LONO, M=0, f="builtin:exp_log", q_list=[1, 3], I1=[1 / 6, 1]))
    code, out, _ = run(["cone", "--spec", path], capsys)
    assert code == 0 and (out["eta"], out["gamma"]) == (2, 0)
    assert out["k2"] == pytest.approx(0.25, abs=1e-9) and out["m1"] == pytest.approx(1 / 162, abs=1e-9)
    dump = tmp_path / "u.csv"
    code, out, _ = run(["solve", "--spec", path, "--dump", str(dump)], capsys)
    assert code == 0 and out["converged"] and out["residual"] <= 1e-8 and out["cone"]["member"]
    assert next(csv.reader(open(dump))) == ["t", "u", "u'", "u''", "u'''"]


def test_solve_needs_f(spec_file, capsys):
    code, out, _ = run(["solve", "--spec", spec_file(dict(LONO, M=0))], capsys)
    assert code == 2 and out["field"] == "f"


def test_output_is_deterministic(spec_file, capsys):
    path = spec_file(LONO)
    first = (main(["interval", "--spec", path, "--q", "1"]), capsys.readouterr().out)
    second = (main(["interval", "--spec", path, "--q", "1"]), capsys.readouterr().out)
    assert first == second
    json.loads(first[1])


def test_module_entry_point(spec_file):
    proc = subprocess.run([sys.executable, "-m", "greensign", "analyze", "--spec", spec_file(LONO), "--json"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stderr == ""
    assert json.loads(proc.stdout)["eta"] == 2
