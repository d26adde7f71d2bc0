import json
import subprocess
import sys

import numpy as np
import pytest

from heisencyl.bounds import REPORT_COLUMNS, BoundReport
from heisencyl.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VIOLATION, main
from heisencyl.eigensolve import Spectrum, dense_jacobi_all
from heisencyl.geometry2d import unit_square
from heisencyl.operator import heisenberg_matrix

SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]
LSHAPE = [[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]]


@pytest.fixture
def write(tmp_path):
    def _write(obj, name="cfg.json"):
        p = tmp_path / name
        p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(p)

    return _write


def cube(**kw):
    cfg = {"polygon": SQUARE, "a": 0, "b": 1, "h_plane": 1 / 6, "num_eigenpairs": 5, "lambda_grid": {"count": 12}}
    cfg.update(kw)
    return cfg


def test_geom_row(write, capsys):
    assert main(["geom", write(cube(h_plane=1 / 128))]) == EXIT_OK
    header, row = capsys.readouterr().out.splitlines()
    assert header == "area,inradius,l_omega,height,volume"
    np.testing.assert_allclose([float(x) for x in row.split(",")], [1.0, 0.5, 2.0, 1.0, 1.0], atol=0.05)


def test_malformed_json_names_problem(write, caplog):
    assert main(["geom", write("{bad")]) == EXIT_CONFIG
    assert "not valid JSON" in caplog.text


def test_missing_field_is_named(write, caplog):
    cfg = cube()
    del cfg["h_plane"]
    assert main(["geom", write(cfg)]) == EXIT_CONFIG
    assert "h_plane" in caplog.text


def test_two_vertex_polygon(write):
    assert main(["geom", write(cube(polygon=[[0, 0], [1, 0]]))]) == EXIT_CONFIG


@pytest.mark.parametrize("bad", [{"a": 1, "b": 0}, {"h_plane": -0.1}, {"num_eigenpairs": 0}, {"c_mode": "x"}])
def test_invalid_fields(write, bad):
    assert main(["spectrum", write(cube(**bad))]) == EXIT_CONFIG


def test_spectrum_matches_dense_oracle(write, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["spectrum", write(cube()), "-o", str(out)]) == EXIT_OK
    spec = Spectrum.from_csv(out.read_text())
    A, _ = heisenberg_matrix(unit_square(), 0, 1, 1 / 6)
    ref = dense_jacobi_all(A).eigenvalues[:5]
    np.testing.assert_allclose(spec.eigenvalues, ref, rtol=1e-8)


def test_spectrum_is_byte_identical_and_round_trips(write, tmp_path):
    cfg = write(cube())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["spectrum", cfg, "-o", str(a)])
    main(["spectrum", cfg, "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()
    assert Spectrum.from_csv(a.read_text()).to_csv() == a.read_text()


def test_too_many_pairs(write):
    assert main(["spectrum", write(cube(h_plane=1 / 4, num_eigenpairs=10))]) == EXIT_CONFIG


def test_unconverged_solver_exit(write):
    assert main(["spectrum", write(cube(solver={"tol": 1e-15, "max_iter": 2}))]) == EXIT_SOLVER


def test_check_pipeline_passes_and_round_trips(write, tmp_path):
    out = tmp_path / "r.csv"
    js = tmp_path / "r.json"
    assert main(["check", write(cube(h_plane=1 / 8, num_eigenpairs=20)), "-o", str(out), "--json", str(js)]) == EXIT_OK
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(REPORT_COLUMNS)
    assert BoundReport.from_csv(text).to_csv() == text
    assert json.loads(js.read_text())["failures"] == 0


def test_injected_violation(write, tmp_path):
    sp = tmp_path / "fake.csv"
    sp.write_text("index,eigenvalue,residual\n1,0.001,0.0\n")
    cfg = write(cube(lambda_grid={"min": 1.0, "max": 1000.0, "count": 5}))
    assert main(["check", cfg, "--spectrum", str(sp), "-o", str(tmp_path / "r.csv")]) == EXIT_VIOLATION


def test_non_convex_corollary_column_empty(write, tmp_path):
    out = tmp_path / "r.csv"
    cfg = write({"polygon": LSHAPE, "a": 0, "b": 1, "h_plane": 0.25, "num_eigenpairs": 10, "corollary": True,
                 "lambda_grid": {"count": 6}})
    assert main(["check", cfg, "-o", str(out)]) == EXIT_OK
    rows = out.read_text().splitlines()[1:]
    col = REPORT_COLUMNS.index("rhs_corollary")
    assert rows and all(r.split(",")[col] == "" for r in rows)
    # worst-case Hardy constant for non-convex sections
    assert all(float(r.split(",")[REPORT_COLUMNS.index("c_used")]) == 4.0 for r in rows)


def test_bad_spectrum_file(write, tmp_path):
    sp = tmp_path / "bad.csv"
    sp.write_text("foo,bar\n1,2\n")
    assert main(["check", write(cube()), "--spectrum", str(sp)]) == EXIT_CONFIG


def test_hardy_rows(write, capsys):
    assert main(["hardy", write(cube(h_plane=1 / 16, hardy_levels=2))]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "h,c_est,residual"
    cs = [float(line.split(",")[1]) for line in lines[1:]]
    assert len(cs) == 2 and cs[0] <= cs[1] < 2.02


def test_landau_small_box(capsys):
    assert main(["landau", "--B", "0", "--half-width", "2", "--h", "0.1"]) == EXIT_OK
    rows = capsys.readouterr().out.splitlines()[1:]
    lam = [float(r.split(",")[1]) for r in rows]
    want = 2 * (2 - 2 * np.cos(np.pi * 0.1 / 4)) / 0.01
    assert lam[0] == pytest.approx(want, rel=1e-6)
    assert lam[1] == pytest.approx(lam[0], rel=1e-6)


def test_asymp_emits_ratio_and_fit(write, tmp_path):
    out, js = tmp_path / "a.csv", tmp_path / "a.json"
    assert main(["asymp", write(cube(h_plane=1 / 8, num_eigenpairs=20)), "-o", str(out), "--json", str(js)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "lambda,weyl_ratio,berezin_gap"
    assert all(float(line.split(",")[1]) <= 1.05 for line in lines[1:])
    assert np.isfinite(json.loads(js.read_text())["remainder_exponent_fit"])


def test_module_entry_point(write):
    proc = subprocess.run([sys.executable, "-m", "heisencyl", "geom", write(cube())], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("area,")
