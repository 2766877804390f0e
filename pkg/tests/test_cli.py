import csv
import json
import math
import subprocess
import sys
from pathlib import Path

from secularbilliards.cli import main
from secularbilliards.runner import BOUNCE_COLUMNS, TRAJECTORY_COLUMNS

FIXTURES = Path(__file__).parent / "fixtures"


def write(tmp_path, doc, name="sc.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def header(path):
    with open(path) as fh:
        return next(csv.reader(fh))


def test_simulate_circular(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--scenario", "builtin:kepler-circular", "--out", str(out)]) == 0
    assert header(out / "trajectory.csv") == list(TRAJECTORY_COLUMNS)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["exit_code"] == 0 and summary["bounds_ok"]
    for k in ("E_target", "E_kep", "C", "A1", "D", "E_sph"):
        assert summary["max_drift"][k] <= 1e-9
    rows = list(csv.reader(open(out / "trajectory.csv")))
    assert len(rows) == 1 + 1001


def test_overrides(tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--scenario", "builtin:kepler-minimal", "--out", str(out), "--samples", "11",
                 "--tol", "1e-9"]) == 0
    assert len((out / "trajectory.csv").read_text().splitlines()) == 12
    assert main(["simulate", "--scenario", "builtin:kepler-minimal", "--out", str(out), "--tol", "1"]) == 2


def test_billiard_and_determinism(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert main(["billiard", "--scenario", str(FIXTURES / "golden_scenario.json"), "--out", str(o),
                     "--svg", str(o / "plot.svg")]) == 0
    assert header(outs[0] / "bounces.csv") == list(BOUNCE_COLUMNS)
    for f in ("trajectory.csv", "bounces.csv"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    assert (outs[0] / "plot.svg").read_text().startswith("<svg")
    rows = list(csv.DictReader(open(outs[0] / "bounces.csv")))
    assert len(rows) == 5
    assert all(abs(float(r["dD"])) <= 1e-10 for r in rows)


def test_csv_numbers_round_trip(tmp_path):
    out = tmp_path / "o"
    main(["simulate", "--scenario", "builtin:kepler-minimal", "--out", str(out), "--samples", "5"])
    for row in list(csv.reader(open(out / "trajectory.csv")))[1:]:
        for x in row:
            assert repr(float(x)) == x


def test_config_errors(tmp_path, capsys):
    bad = write(tmp_path, {"walls": [{"knd": "ellipse"}]})
    assert main(["billiard", "--scenario", bad, "--out", str(tmp_path / "o")]) == 2
    assert "walls[0].knd" in capsys.readouterr().err
    region = write(tmp_path, {"system": "averaged", "params": {"m2": 0.1, "a": 0.3},
                              "initial": {"state": [1, 0, 0, 1.6]}})
    assert main(["simulate", "--scenario", region, "--out", str(tmp_path / "o")]) == 2
    assert "region R" in capsys.readouterr().err
    assert main(["billiard", "--scenario", "builtin:kepler-circular", "--out", str(tmp_path / "o")]) == 2
    assert "walls" in capsys.readouterr().err
    assert main(["simulate", "--scenario", "builtin:kepler-focal-line-euclidean", "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--scenario", "builtin:nope", "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate"]) == 2


def test_singularity_exit(tmp_path):
    sc = write(tmp_path, {"initial": {"state": [1, 0, 0, 0]}, "run": {"t_end": 5}})
    out = tmp_path / "o"
    assert main(["simulate", "--scenario", sc, "--out", str(out)]) == 3
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "singularity" and summary["t_final"] < 5
    assert (out / "trajectory.csv").exists()


def test_degeneracy_exit(tmp_path):
    h = 0.5 / math.sqrt(1.25)
    th = 0.3 + 1e-10
    start = [0.1 * math.cos(th), -h + 0.1 * math.sin(th), math.cos(th), math.sin(th)]
    sc = write(tmp_path, {"params": {"m1": 0.0, "a": 0.5}, "initial": {"state": start},
                          "walls": [{"kind": "ellipse", "s": 1.0, "arc": [0.3, 1.0]}], "run": {"t_end": 3}})
    assert main(["billiard", "--scenario", sc, "--out", str(tmp_path / "o")]) == 4


def test_bound_violation_exit(tmp_path):
    sc = write(tmp_path, {"initial": {"state": [1, 0, 0, 1.2]}, "bounds": {"drift": {"E_kep": 1e-30}}})
    out = tmp_path / "o"
    assert main(["simulate", "--scenario", sc, "--out", str(out)]) == 5
    assert json.loads((out / "summary.json").read_text())["violations"]


def test_help_documents_columns(capsys):
    assert main(["--help"]) == 0
    text = capsys.readouterr().out
    for col in list(TRAJECTORY_COLUMNS) + list(BOUNCE_COLUMNS):
        assert f"  {col} " in text
    for cmd in ("simulate", "billiard", "check", "sweep"):
        assert cmd in text


def test_check_command(tmp_path, capsys):
    assert main(["check", "identities", "--samples", "50", "--seed", "3", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "check_report.json").read_text())
    assert report["seed"] == 3 and report["reports"][0]["passed"]
    assert main(["check", "nonsense"]) == 2


def test_sweep(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", "--scenario", str(FIXTURES / "golden_scenario.json"), "--scenario",
                 "builtin:kepler-minimal", "--out", str(out), "--jobs", "2"])
    assert code == 0
    rows = list(csv.DictReader(open(out / "sweep.csv")))
    assert [r["name"] for r in rows] == ["golden-spherical-ellipse-000", "golden-spherical-ellipse-001",
                                         "kepler-minimal"]
    assert [r["bounces"] for r in rows] == ["3", "4", "0"]
    assert (out / "kepler-minimal" / "trajectory.csv").exists()


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "secularbilliards", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "kepler-circular" in res.stdout
