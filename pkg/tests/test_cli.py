import json
import subprocess
import sys

import pytest

from urnflow.cli import main

from conftest import law_path


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_example(capsys):
    code, out = run(["example"], capsys)
    assert code == 0
    assert "4,5,3,4,1/6" in out.out and "golden values: match" in out.out


@pytest.mark.parametrize("name,regime", [("case_i", "above"), ("case_ii", "boundary"), ("case_iii", "below")])
def test_analyze(capsys, name, regime):
    code, out = run(["analyze", "--law", law_path(name)], capsys)
    assert code == 0
    data = json.loads(out.out)
    assert data["regime"] == regime and "assumptions" in data


def test_simulate_csv(capsys, tmp_path):
    code, out = run(["simulate", "--law", law_path("case_i"), "--j0", "2", "--steps", "50", "--seed", "1", "--checkpoints", "0,10,50"], capsys)
    assert code == 0
    lines = out.out.strip().splitlines()
    assert lines[0] == "n,B_1,B_2,survived" and lines[1] == "0,0,1,1"
    assert len(lines) == 4


def test_embed_json(capsys):
    code, out = run(["embed", "--law", law_path("case_iii"), "--depth", "3", "--seed", "2"], capsys)
    assert code == 0
    assert len(json.loads(out.out)["Z"]) == 5


def test_clt_byte_identical(capsys):
    argv = ["clt", "--law", law_path("case_iii"), "--n", "10000", "--replicates", "2000", "--seed", "7"]
    c1, o1 = run(argv, capsys)
    c2, o2 = run(argv, capsys)
    assert c1 == c2 == 0
    assert o1.out == o2.out


def test_clt_negative_control_exit_code(capsys):
    code, out = run(["clt", "--law", law_path("case_ii"), "--n", "10000", "--replicates", "2000", "--scaling", "below"], capsys)
    assert code == 2
    assert json.loads(out.out)["verdict"] == "reject"


def test_lln_and_equivalence(capsys):
    assert run(["lln", "--law", law_path("case_iii"), "--n", "10000"], capsys)[0] == 0
    assert run(["equivalence", "--law", law_path("golden"), "--k", "4", "--replicates", "10000"], capsys)[0] == 0


def test_profile_outputs(capsys, tmp_path):
    j, c = tmp_path / "p.json", tmp_path / "s.csv"
    code, _ = run(["profile", "--law", law_path("case_ii"), "--json", str(j), "--csv", str(c)], capsys)
    assert code == 0
    assert json.loads(j.read_text())["ell_star"] == 0.0
    assert c.read_text().startswith("x,Uppsi")


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["clt"],
        ["analyze", "--law", "/nonexistent.json"],
        ["simulate", "--law", "x", "--steps", "3", "--j0", "0"],
        ["frobnicate"],
    ],
)
def test_errors_exit_one(capsys, argv):
    assert run(argv, capsys)[0] == 1


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "urnflow.cli", "example"], capture_output=True, text=True)
    assert res.returncode == 0 and "1/6" in res.stdout
