import csv
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from quantum_graph_lab.cli import main
from quantum_graph_lab.graphfile import read_graph
from quantum_graph_lab.secular import count_at_most

PI2 = math.pi**2


def run(capsys, *argv):
    status = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return status, out, err


def table(text):
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def header(text):
    out = {}
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            out.setdefault(key, value)
    return out


def test_check_every_example(capsys, graphs_dir):
    for path in sorted(graphs_dir.glob("*.g")):
        status, out, _ = run(capsys, "check", path)
        assert status == 0, path.name
        assert header(out)["status"] == "pass"


def test_check_invalid_files(capsys, graphs_dir):
    for path in sorted((graphs_dir / "invalid").glob("*.g")):
        status, out, err = run(capsys, "check", path)
        assert status == 2, path.name
        assert path.stem.split("_shape")[0] in err
        assert "line" in err
        assert out == ""


def test_spectrum_of_the_star(capsys, graphs_dir):
    status, out, _ = run(capsys, "spectrum", graphs_dir / "star.g", "--lambda-max", 25)
    assert status == 0
    rows = table(out)
    assert [r["index"] for r in rows] == ["1", "2", "3", "4"]
    lams = [float(r["lambda"]) for r in rows]
    assert np.allclose(lams, np.array([0.25, 1, 1, 2.25]) * PI2, rtol=1e-12)
    assert [r["multiplicity"] for r in rows] == ["1", "2", "2", "1"]
    h = header(out)
    assert h["schema_version"] == "1"
    assert h["command"] == "spectrum"
    assert h["input"].startswith("star.g sha256=")
    assert "tau_mult=" in h["tolerances"]


def test_floats_carry_17_digits(capsys, graphs_dir):
    _, out, _ = run(capsys, "spectrum", graphs_dir / "interval.g", "--count", 1)
    value = table(out)[0]["lambda"]
    assert float(value) == pytest.approx(PI2, rel=1e-15)
    assert value == format(float(value), ".17g")


def test_output_is_deterministic(capsys, graphs_dir, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for target in (a, b):
        assert run(capsys, "spectrum", graphs_dir / "generic_star.g", "--count", 6, "-o", target)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_hadamard_example(capsys, graphs_dir):
    status, out, _ = run(capsys, "hadamard", graphs_dir / "interval.g", "--edge", "e1", "--index", 1, "--fd-step", "1e-4")
    assert status == 0
    (row,) = table(out)
    assert float(row["formula"]) == pytest.approx(-2 * PI2, rel=1e-12)
    assert float(row["relative_mismatch"]) <= 1e-4
    assert row["passed"] == "true"


def test_hadamard_convergence_flag(capsys, graphs_dir):
    status, out, _ = run(capsys, "hadamard", graphs_dir / "robin_interval.g", "--vertex", "b", "--index", 1, "--convergence")
    assert status == 0
    assert len(table(out)) == 2
    assert 3.5 <= float(header(out)["ratio"]) <= 4.5


def test_spiral_example(capsys, graphs_dir):
    status, out, _ = run(capsys, "spiral", graphs_dir / "interval.g", "--vertex", "b", "--theta-steps", 64, "--lambda-max", 60)
    assert status == 0
    rows = table(out)
    assert {r["in_delta"] for r in rows} == {"false"}
    g = read_graph(graphs_dir / "interval.g")
    from quantum_graph_lab.conditions import CirclePoint

    thetas = sorted({r["theta"] for r in rows}, key=float)
    assert len(thetas) == 64
    for t in thetas:
        gt = g.with_condition("b", CirclePoint(float(t)))
        expected = count_at_most(gt, 60.0) - count_at_most(gt, -5.0)
        assert sum(r["theta"] == t for r in rows) == expected


def test_eigenfunction_columns(capsys, graphs_dir):
    status, out, _ = run(capsys, "eigenfunction", graphs_dir / "interval.g", "--index", 1, "--points", 5)
    assert status == 0
    rows = table(out)
    assert list(rows[0]) == ["edge_id", "x", "f", "fprime"]
    f = np.array([float(r["f"]) for r in rows])
    assert np.allclose(np.abs(f), math.sqrt(2) * np.abs(np.sin(math.pi * np.linspace(0, 1, 5))), atol=1e-12)


def test_refusals_exit_3(capsys, graphs_dir):
    status, _, err = run(capsys, "eigenfunction", graphs_dir / "interval.g", "--lambda", 5)
    assert status == 3 and "E_NOT_EIGENVALUE" in err
    status, out, err = run(capsys, "nodal", graphs_dir / "star.g", "--index", 2)
    assert status == 3 and "E_HYPOTHESIS" in err
    assert header(out)["status"] == "refused"
    status, _, err = run(capsys, "hadamard", graphs_dir / "star.g", "--vertex", "c", "--index", 2)
    assert status == 3 and "E_MULTIPLE" in err


def test_structural_errors_exit_2(capsys, graphs_dir):
    status, _, err = run(capsys, "nodal", graphs_dir / "loop.g")
    assert status == 2 and "E_NOT_TREE" in err
    status, _, err = run(capsys, "glue", graphs_dir / "star.g", "--group", "l1,l2")
    assert status == 2 and "E_UNSUPPORTED_SURGERY" in err


def test_property_violation_exits_4(capsys, graphs_dir):
    # an impossible Richardson tolerance makes the comparison fail honestly
    status, out, _ = run(capsys, "oracle-compare", graphs_dir / "generic_star.g", "--count", 3, "--richardson-tol", "1e-14")
    assert status == 4
    assert header(out)["status"] == "fail"


def test_report_commands(capsys, graphs_dir):
    status, out, _ = run(capsys, "interlace", graphs_dir / "generic_star.g", "--vertex", "c", "--alpha-prime", "inf", "--depth", 5)
    assert status == 0
    kinds = {r["kind"] for r in table(out)}
    assert "chain" in kinds
    status, out, _ = run(capsys, "glue", graphs_dir / "loop.g", "--group", "v,t", "--depth", 4)
    assert status == 2  # t is Dirichlet
    status, out, _ = run(capsys, "nodal", graphs_dir / "generic_star.g", "--max-index", 5)
    assert status == 0 and [r["status"] for r in table(out)] == ["pass"] * 5
    status, out, _ = run(capsys, "oracle-compare", graphs_dir / "generic_star.g", "--count", 4)
    assert status == 0
    assert header(out)["slope_ok"] == "true"


def test_glue_neumann_leaves(capsys, tmp_path):
    p = tmp_path / "s.g"
    p.write_text("vertex c delta 0\nvertex a delta 1\nvertex b delta -0.5\nedge e1 c a 1.0\nedge e2 c b 1.4\n")
    status, out, _ = run(capsys, "glue", p, "--group", "a,b", "--depth", 6)
    assert status == 0
    assert header(out)["identifications"] == "1"


@pytest.mark.skipif(shutil.which("qglab") is None, reason="console script not installed")
def test_console_script(graphs_dir):
    proc = subprocess.run(["qglab", "check", str(graphs_dir / "interval.g")], capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "quantum_graph_lab", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("qglab ")
