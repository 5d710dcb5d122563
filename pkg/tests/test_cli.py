from __future__ import annotations

import csv
import json
import math

import pytest

from charpoint_lab.cli import main
from charpoint_lab.errors import WindowBoundaryWarning
from charpoint_lab.report import SCHEMA_VERSION, validate

K2 = "x*y/2 + x^2*y"
COUNTEREXAMPLE = "x*y/2 + y^2/2 + antider_x(flat(x))"


def run(tmp_path, *argv):
    path = tmp_path / "report.json"
    code = main([*argv, "--json", str(path)])
    report = json.loads(path.read_text(encoding="utf-8")) if path.exists() else None
    return code, report


def test_analyze_mildly_degenerate(tmp_path, capsys):
    code, report = run(tmp_path, "analyze", "--surface", K2)
    assert code == 0
    validate(report)
    assert report["schema"] == SCHEMA_VERSION
    (p,) = report["char_points"]
    assert p["class"] == "mildly_degenerate" and p["order_k"] == 2
    assert p["N"] == [1.0, 0.0] and p["alpha"] == 0.0
    assert "mildly_degenerate" in capsys.readouterr().out


def test_analyze_nondegenerate(tmp_path):
    code, report = run(tmp_path, "analyze", "--surface", "(x^2+y^2)/2")
    assert code == 0
    (p,) = report["char_points"]
    assert p["class"] == "nondegenerate"
    assert p["det"] == pytest.approx(1.25, abs=1e-12)


def test_analyze_non_isolated_exits_2(tmp_path):
    # the characteristic line y = 0 runs into the window edge
    with pytest.warns(WindowBoundaryWarning):
        code, report = run(tmp_path, "analyze", "--surface", "x*y/2")
    assert code == 2
    validate(report)
    assert {p["class"] for p in report["char_points"]} == {"non_isolated"}


def test_analyze_from_file_and_contact_frame(tmp_path):
    src = tmp_path / "g.txt"
    src.write_text("(x^2+y^2)/2\n", encoding="utf-8")
    code, report = run(tmp_path, "analyze", "--surface-file", str(src), "--frame", "contact",
                       "--beta", "0", "--gamma", "0")
    assert code == 0
    assert report["char_points"][0]["det"] == pytest.approx(1.25, abs=1e-12)


@pytest.mark.parametrize("argv", [
    ["analyze", "--surface", "x*"],
    ["analyze", "--surface", "x", "--grid", "8"],
    ["analyze", "--surface", "x", "--frame", "contact"],
    ["integrate", "--surface", "0", "--eps-min", "0.5"],
    ["integrate", "--surface", "0", "--outer-radius", "2"],
    ["analyze", "--surface-file", "/nonexistent/g.txt"],
])
def test_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_integrate_plane(tmp_path):
    out = tmp_path / "scan.csv"
    code, report = run(tmp_path, "integrate", "--surface", "0", "--csv", str(out))
    assert code == 0
    validate(report)
    (scan,) = report["integrability"]
    assert scan["verdict"] == "converged"
    assert scan["limit"] == pytest.approx(13.07190087, rel=1e-6)
    raw = out.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.DictReader(raw.decode("utf-8").splitlines()))
    assert len(rows) == len(scan["annuli"])
    assert [float(r["eps"]) for r in rows] == [a["eps"] for a in scan["annuli"]]
    assert all(float(r["value"]) == a["value"] for r, a in zip(rows, scan["annuli"]))


def test_reports_are_byte_identical(tmp_path):
    paths = []
    for name in ("a", "b"):
        p = tmp_path / f"{name}.json"
        assert main(["integrate", "--surface", K2, "--eps-min", "0.03", "--eps-max", "0.125",
                     "--outer-radius", "0.25", "--strategy", "polar", "--json", str(p)]) in (0, 2)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_full_precision_numbers(tmp_path):
    _, report = run(tmp_path, "analyze", "--surface", "(x^2+y^2)/2 + x/3")
    p = report["char_points"][0]
    assert json.loads(json.dumps(p["x"])) == p["x"]
    assert repr(p["x"]) in (tmp_path / "report.json").read_text(encoding="utf-8")


def test_counterexample_verdicts(tmp_path):
    code, report = run(tmp_path, "integrate", "--surface", COUNTEREXAMPLE, "--center", "0,0",
                       "--geometry", "xstrip", "--eps-max", "0.5", "--eps-min", "0.07",
                       "--ratio", repr(2 ** -0.5), "--height", "0.5")
    assert code == 0
    assert report["integrability"][0]["verdict"] == "diverged"


def test_curve_k2(tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["curve", "--surface", K2, "--csv", str(out)]) == 0
    rows = list(csv.DictReader(out.read_text(encoding="utf-8").splitlines()))
    assert list(rows[0]) == ["x_param", "x", "y", "z", "xi"]
    for r in rows:
        x = float(r["x"])
        assert float(r["y"]) == 0.0
        assert float(r["xi"]) == pytest.approx(-x * x, rel=1e-12)


def test_curve_counterexample(capsys):
    assert main(["curve", "--surface", COUNTEREXAMPLE]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    checked = 0
    for r in rows:
        x = float(r["x"])
        if abs(x) > 0.1:
            assert float(r["y"]) == pytest.approx(-math.exp(-1 / x ** 2), rel=1e-9)
            checked += 1
    assert checked > 4


def test_curve_without_degenerate_point(capsys):
    assert main(["curve", "--surface", "(x^2+y^2)/2"]) == 1
    assert "degenerate" in capsys.readouterr().err
