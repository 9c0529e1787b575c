import json

import pytest

from z2filippov.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_scenario_list(capsys):
    code, out = _run(capsys, "scenario", "list")
    assert code == 0 and out.out.splitlines()[0].startswith("s1\tcodim1")


def test_check_success(capsys):
    code, out = _run(capsys, "check", "--scenario", "s3")
    assert code == 0 and json.loads(out.out)["holds"]


def test_check_failure_exit_code(capsys):
    code, _ = _run(capsys, "check", "--scenario", "s1", "--case", "cusp")
    assert code == 2


def test_model_file_without_closing_orbit(tmp_path, capsys):
    p = tmp_path / "m.toml"
    p.write_text('a = 1.0\nm = 0\nf_plus = "1"\ng_plus = "-(x+1)*(x-1/2)"\n')
    code, out = _run(capsys, "coeffs", "--model", str(p), "--case", "codim1")
    assert code == 2 and "hypothesis" in out.err


def test_coeffs_json(capsys):
    code, out = _run(capsys, "coeffs", "--scenario", "s1", "--json")
    d = json.loads(out.out)
    assert code == 0 and d["theta"] == pytest.approx([0.75, 1.5], abs=1e-9)


def test_classify(capsys):
    code, out = _run(capsys, "classify", "--scenario", "s1", "--alpha", "-1e-3,0")
    assert code == 0 and json.loads(out.out)["label"] == "1x stable no-enclosure"


def test_numerical_failure_exit_code(capsys):
    code, out = _run(capsys, "classify", "--scenario", "s2", "--alpha", "0.5,0.5")
    assert code == 3 and "numerical failure" in out.err


def test_simulate(tmp_path, capsys):
    out = tmp_path / "t.csv"
    code, _ = _run(capsys, "simulate", "--scenario", "s1", "--x0", "-0.5", "--y0", "0", "--t", "3",
                   "--out", str(out))
    assert code == 0 and out.read_text().startswith("t,x,y,regime")


def test_sweep_threads_env(tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["sweep", "--scenario", "s2", "--b1", "-4e-5:4e-5:3", "--b2", "-1e-2:1e-2:3"]
    assert main(args + ["--out", str(a)]) == 0
    monkeypatch.setenv("ATLAS_THREADS", "2")
    assert main(args + ["--threads", "1", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_curves_csv(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["curves", "--scenario", "s3", "--rays", "2", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "curve,beta1,beta2"
    assert {r.split(",")[0] for r in rows[1:]} >= {"CS+", "SH+", "TC+", "TC-", "SH-", "CS-", "F0", "AX"}
