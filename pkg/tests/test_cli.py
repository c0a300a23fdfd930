import json
import subprocess
import sys

import pytest

from jacobi_invariants.cli import dumps, load_problem, main

PG18_FILE = {
    "phi": "-ln(x)",
    "B": "-4*x^2",
    "delta2": "2*x^2",
    "params": {},
    "t0": 0.0, "t_end": 0.4, "x0": 1.0, "v0": 0.0,
    "domain": [0.0, 0.4, 0.4, 3.0],
}

PG4_FILE = {
    "phi": "0",
    "B": "-(6*x^2+t)",
    "eta": "-2*x^3*t",
    "delta2": "t*x",
    "params": {},
    "t0": 0.0, "t_end": 0.7, "x0": 1.0, "v0": 0.0,
}

JAC_FILE = {
    "phi": "t+x",
    "B": "rho*exp(-(t+x)/2)",
    "rho1": "rho",
    "rho2": "0",
    "delta1": "2*rho*exp((t+x)/2)",
    "delta2": "0",
    "params": {"rho": 1.0},
    "t0": 0.0, "t_end": 4.0, "x0": 2.772588722239781, "v0": -1.0,
}


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run_main(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_pg4(tmp_path, capsys):
    code, out, _ = run_main(["check", write(tmp_path, "pg4.json", PG4_FILE)], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["classification"]["tag"] == "TimeIndependentPhi"
    assert report["pass"] is True
    names = {h["name"] for h in report["hypotheses"]}
    assert "accumulator_hypothesis" in names


def test_check_inconsistent_delta2_fails(tmp_path, capsys):
    bad = dict(PG18_FILE, delta2="2*x^2 + x")
    code, out, _ = run_main(["check", write(tmp_path, "bad.json", bad)], capsys)
    report = json.loads(out)
    assert code == 1
    assert report["pass"] is False
    failing = [h for h in report["hypotheses"] if not h["passed"]]
    assert failing and any(h["residual"] not in ("", "0") for h in failing)


def test_check_jac_first_integral_condition(tmp_path, capsys):
    code, out, _ = run_main(["check", write(tmp_path, "jac.json", JAC_FILE)], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["classification"]["tag"] == "General"
    cond = [h for h in report["hypotheses"] if h["name"] == "first_integral_condition"]
    assert cond and cond[0]["passed"]
    assert "closed_form_exponent" in cond[0]


def test_check_bad_json_exit_2(tmp_path, capsys):
    path = tmp_path / "junk.json"
    path.write_text("{not json")
    code, _, err = run_main(["check", str(path)], capsys)
    assert code == 2
    assert "error" in err


def test_check_missing_key_exit_2(tmp_path, capsys):
    code, _, err = run_main(
        ["check", write(tmp_path, "m.json", {"phi": "0", "B": "0"})], capsys)
    assert code == 2
    assert "t0" in err


def test_check_parse_error_exit_2(tmp_path, capsys):
    bad = dict(PG18_FILE, B="4*x^^2")
    code, _, err = run_main(["check", write(tmp_path, "p.json", bad)], capsys)
    assert code == 2


def test_run_pg18(tmp_path, capsys):
    code, out, _ = run_main(
        ["run", write(tmp_path, "pg18.json", PG18_FILE), "--tol", "1e-10"], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["pass"] is True
    assert report["termination"]["status"] == "Completed"
    assert all(inv["gate"] for inv in report["invariants"])
    assert all(inv["drift"]["rel_drift"] < 1e-6 for inv in report["invariants"])


def test_run_pg4_with_oracle(tmp_path, capsys):
    code, out, _ = run_main(
        ["run", write(tmp_path, "pg4.json", PG4_FILE), "--oracle"], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["oracle"]["max_discrepancy"] < 1e-5
    assert report["oracle"]["gate"] is True


def test_run_jac(tmp_path, capsys):
    code, out, _ = run_main(["run", write(tmp_path, "jac.json", JAC_FILE)], capsys)
    report = json.loads(out)
    assert code == 0
    inv = report["invariants"][0]
    assert inv["kind"] == "FirstIntegral"
    assert inv["drift"]["rel_drift"] < 1e-8


def test_run_csv_output(tmp_path, capsys):
    code, out, _ = run_main(
        ["run", write(tmp_path, "pg18.json", PG18_FILE), "--out", "csv"], capsys)
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0].startswith("t,x,v")
    assert len(lines) > 10


def test_run_abort_before_ten_percent_exit_3(tmp_path, capsys):
    # valid autonomous data, but the trajectory crosses x = 0 (where
    # sqrt(x) leaves its domain) around t = 0.04, well before 10% of the
    # window
    data = {
        "phi": "0", "B": "-sqrt(x)", "delta2": "2/3*x^(3/2)",
        "params": {}, "t0": 0.0, "t_end": 1.0, "x0": 0.04, "v0": -1.0,
        "domain": [0.0, 1.0, 0.0, 1.2],
    }
    code, out, _ = run_main(["run", write(tmp_path, "a.json", data)], capsys)
    assert code == 3
    report = json.loads(out)
    assert report["termination"]["status"] == "DomainAbort"
    assert report["termination"]["t"] < 0.1


def test_catalog_list(capsys):
    code, out, _ = run_main(["catalog", "list"], capsys)
    assert code == 0
    assert json.loads(out)["fixtures"] == [
        "PG18", "PG21", "PG22", "PG4", "PG20", "JAC_EXACT"]


def test_catalog_run_pg20(capsys):
    code, out, _ = run_main(["catalog", "run", "PG20"], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["fixture"] == "PG20"
    assert report["pass"] is True


def test_catalog_run_unknown_exit_2(capsys):
    code, _, err = run_main(["catalog", "run", "PG99"], capsys)
    assert code == 2


def test_catalog_run_all_byte_identical():
    cmd = [sys.executable, "-m", "jacobi_invariants.cli",
           "catalog", "run", "--all", "--grid", "256"]
    r1 = subprocess.run(cmd, capture_output=True, check=False)
    r2 = subprocess.run(cmd, capture_output=True, check=False)
    assert r1.returncode == 0, r1.stderr.decode()
    assert r1.stdout == r2.stdout
    reports = json.loads(r1.stdout)
    assert [r["fixture"] for r in reports] == list(
        ("PG18", "PG21", "PG22", "PG4", "PG20", "JAC_EXACT"))


def test_dumps_float_format():
    text = dumps({"a": 0.5, "n": 3, "flag": True, "s": "x", "list": [1.0]})
    assert '"a": 5.000000000000e-01' in text
    assert '"n": 3' in text
    assert '"flag": true' in text
    assert json.loads(text)["list"] == [1.0]


def test_load_problem_rejects_bad_domain():
    from jacobi_invariants.cli import InputError

    data = dict(PG18_FILE, domain=[1, 2])
    with pytest.raises(InputError):
        load_problem(data)
