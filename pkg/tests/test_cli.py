from __future__ import annotations

import csv
import json
import math
from fractions import Fraction

import pytest

from laakso_lab.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_build_level_two(tmp_path, capsys):
    out = tmp_path / "f2.json"
    code, _, err = run(["build", "--Q", "2", "--level", "2", "--out", str(out)], capsys)
    assert code == 0 and "resolved config" in err
    assert len(json.loads(out.read_text())["edges"]) == 16


def test_build_is_idempotent(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["build", "--t", "1/3", "--level", "2", "--out", str(a)], capsys)
    run(["build", "--t", "1/3", "--level", "2", "--out", str(b)], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_spectrum_csv(tmp_path, capsys):
    g, eigs = tmp_path / "f0.json", tmp_path / "eigs.csv"
    run(["build", "--Q", "2", "--level", "0", "--out", str(g)], capsys)
    code, _, _ = run(["spectrum", "--graph", str(g), "--eigs", "5", "--grid", "10", "--out", str(eigs)], capsys)
    assert code == 0
    rows = list(csv.DictReader(eigs.open()))
    assert len(rows) == 5
    assert abs(float(rows[1]["eigenvalue"]) - math.pi**2) / math.pi**2 < 1e-4


def test_verify_default(capsys):
    code, out, _ = run(["verify", "--suite", "construction"], capsys)
    assert code == 0 and json.loads(out)["suite"] == "construction"


@pytest.mark.parametrize("argv", [
    ["build", "--Q", "2", "--t", "1/2"],
    ["build", "--Q", "3"],
    ["verify", "--suite", "nope"],
    ["spectrum", "--graph", "/nonexistent/graph.json"],
    ["distance", "--t", "1/2", "--level", "1", "--p", "0", "01", "--q", "0", "1"],
    ["simulate", "--T", "-1"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_malformed_json_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"a": 1,\n "b": }')
    code, _, err = run(["spectrum", "--graph", str(bad)], capsys)
    assert code == 2 and "line 2, column 7" in err


def test_missing_file_named(capsys):
    code, _, err = run(["energy", "--graph", "missing.json"], capsys)
    assert code == 2 and "missing.json" in err


def test_distance_and_ball(capsys):
    code, out, _ = run(["distance", "--t", "1/2", "--level", "1", "--p", "0", "0", "--q", "0", "1",
                        "--radius", "1/4"], capsys)
    data = json.loads(out)
    assert code == 0 and data["distance"] == "1/1"
    assert data["ball_measure"] == "1/8"  # [0, 1/4] on one edge of density 1/2


def test_simulate_thread_invariance(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["simulate", "--t", "1/2", "--level", "1", "--grid", "2", "--N", "20", "--T", "0.05", "--seed", "4"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--threads", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    summary = tmp_path / "s.json"
    assert main(base + ["--format", "json", "--summary", str(summary)]) == 0
    assert json.loads(summary.read_text())["seed"] == 4


def test_energy_and_ahlfors(tmp_path, capsys):
    code, out, _ = run(["energy", "--t", "1/2", "--level", "1", "--grid", "8"], capsys)
    data = json.loads(out)
    assert code == 0 and "/" in data["energy"]
    assert abs(float(data["discrete_energy"]) - float(Fraction(data["energy"]))) < 1e-3
    code, out, _ = run(["ahlfors", "--t", "1/2", "--level", "4", "--samples", "50"], capsys)
    assert code == 0 and abs(json.loads(out)["exponent"] - 2) < 0.3


def test_poincare_command(capsys):
    code, out, _ = run(["poincare", "--t", "1/2", "--levels", "1", "2", "--functions", "4", "--balls", "4"], capsys)
    data = json.loads(out)
    assert code == 0 and [r["level"] for r in data["levels"]] == [1, 2]
