"""Command line verbs, exit codes, config errors and report determinism."""

import csv
import io
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from dmpfem import cli
from dmpfem import mesh as M


def _run(argv):
    out = io.StringIO()
    code = cli.main(argv, out=out)
    return code, out.getvalue()


def _config(tmp_path, body, name="exp.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return path


SMALL = """
    [problem]
    name = ex5.1
    bnorm = 10

    [mesh]
    family = acute8
    nx = 3 5

    [sweep]
    bnorm = 1 20

    [output]
    report = report.csv
    vtk = u_{N}_{bnorm}.vtk
    geometry = geom_{N}.csv
    thm41 = thm41_{N}.csv
    edge2d = edge_{N}.csv
    matrix = A_{N}.txt
"""


class TestRun:
    def test_sweep_outputs(self, tmp_path):
        code, text = _run(["run", str(_config(tmp_path, SMALL))])
        assert code == cli.EXIT_OK
        assert text.count("cell ") == 4
        rows = list(csv.DictReader(open(tmp_path / "report.csv")))
        assert [r["N"] for r in rows] == ["72", "72", "200", "200"]
        assert list(rows[0]) == cli.REPORT_COLUMNS
        for name in ("u_72_1.vtk", "u_200_20.vtk", "geom_72.csv", "thm41_200.csv",
                     "edge_72.csv", "A_200.txt"):
            assert (tmp_path / name).exists(), name
        assert (tmp_path / "u_72_1.vtk").read_text().startswith("# vtk DataFile Version")

    def test_condition_failures_are_data(self, tmp_path):
        code, _ = _run(["run", str(_config(tmp_path, SMALL))])
        rows = list(csv.DictReader(open(tmp_path / "report.csv")))
        assert code == cli.EXIT_OK
        assert any(r["thm41"] == "fail" for r in rows)

    def test_rows_consistent_with_modules(self, tmp_path):
        from dmpfem import assembly as A
        from dmpfem import conditions as C
        from dmpfem import dmp_verify as V
        from dmpfem import problem as P

        _run(["run", str(_config(tmp_path, SMALL))])
        rows = list(csv.DictReader(open(tmp_path / "report.csv")))
        r = rows[3]
        p = P.ex51(bnorm=20)
        mesh = M.generate_acute8_split(5, 5, (0, 16, 0, 16))
        s = A.assemble(p, mesh)
        u, res = A.solve(s, return_residual=True)
        rep = V.verify(s, p, mesh, u, res)
        flag = lambda ok: "pass" if ok else "fail"
        assert r["thm41"] == flag(C.check_thm41(mesh, p).passed)
        assert r["edge2d"] == flag(C.check_edge_condition_2d(mesh, p).passed)
        assert r["z"] == flag(rep.z_matrix.passed)
        assert r["rowsum"] == flag(rep.row_sums_nonneg.passed)
        assert r["mmatrix"] == rep.m_matrix.status
        assert float(r["minus_umin"]) == rep.minus_umin
        assert float(r["b_inf"]) == pytest.approx(20 * np.sqrt(2))

    def test_report_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.mkdir()
        b.mkdir()
        _run(["run", str(_config(a, SMALL))])
        _run(["run", str(_config(b, SMALL))])
        for name in ("report.csv", "thm41_72.csv", "edge_200.csv", "A_72.txt", "geom_200.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_sizes_by_element_count(self, tmp_path):
        body = """
            [problem]
            name = ex5.3
            [mesh]
            family = acute8
            sizes = 200
            [checks]
            mmatrix = no
            [output]
            report = r.csv
        """
        assert _run(["run", str(_config(tmp_path, body))])[0] == 0
        row = next(csv.DictReader(open(tmp_path / "r.csv")))
        assert row["N"] == "200" and row["mmatrix"] == ""

    def test_numerical_failure_exit_3(self, tmp_path):
        body = """
            [problem]
            name = constant
            diffusion = 1 2 2 1
            convection = 0 0
            [mesh]
            family = right
            nx = 2
        """
        code, text = _run(["run", str(_config(tmp_path, body))])
        assert code == cli.EXIT_NUMERIC
        assert "ERROR" in text


class TestConfigErrors:
    @pytest.mark.parametrize("body,where", [
        ("[problem]\nname = ex5.1\n", "[mesh]"),
        ("[mesh]\nnx = 2\n", "[problem] name"),
        ("[problem]\nname = ex5.1\n[mesh]\nnx = two\n", "[mesh] nx"),
        ("[problem]\nname = ex5.1\n[mesh]\nsizes = 100\n", "[mesh] sizes"),
        ("[problem]\nname = ex5.1\n[mesh]\nfamily = hex\nnx = 2\n", "[mesh] family"),
        ("[problem]\nname = ex5.1\n[mesh]\nnx = 2\n[checks]\nthm41 = maybe\n", "[checks] thm41"),
        ("[problem]\nname = ex5.1\n[mesh]\nnx = 2\n[output]\nplot = x.png\n", "[output] plot"),
        ("[problem]\nname = ex5.1\n[mesh]\nnx = 2\n[solvr]\nrtol = 1\n", "[solvr]"),
        ("[problem]\nname = ex9\n[mesh]\nnx = 2\n", "[problem]"),
        ("[problem]\nname = ex5.1\n[mesh]\nnx = 2\n[sweep]\nbnorm = a b\n", "[sweep] bnorm"),
        ("[problem]\nname = ex5.1\n[mesh]\nnx = 2\n[output]\nvtk = u_{M}.vtk\n", "[output] vtk"),
    ])
    def test_location_in_message(self, tmp_path, capsys, body, where):
        code, _ = _run(["run", str(_config(tmp_path, body))])
        assert code == cli.EXIT_USAGE
        assert where in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert _run(["run", str(tmp_path / "none.ini")])[0] == cli.EXIT_USAGE
        assert "cannot read config" in capsys.readouterr().err

    def test_usage_error(self):
        assert _run(["frobnicate"])[0] == cli.EXIT_USAGE
        assert _run([])[0] == cli.EXIT_USAGE


OVERLAP = "2 4 0 2\n0 0\n1 0\n1 1\n0 1\n0 1 2\n0 1 3\n"


class TestCertify:
    def test_ex52_fine_passes(self):
        code, text = _run(["certify", "--family", "right", "--nx", "20", "--problem", "ex5.2",
                           "--param", "bnorm=0.01"])
        assert code == cli.EXIT_OK
        assert "thm41: PASS" in text and "h_bound[euclidean]" in text

    def test_ex53_element_fails_edge_passes(self):
        code, _ = _run(["certify", "--family", "acute8", "--nx", "35", "--problem", "ex5.3"])
        assert code == cli.EXIT_FAIL
        code, text = _run(["certify", "--family", "acute8", "--nx", "35", "--problem", "ex5.3",
                           "--condition", "edge2d"])
        assert code == cli.EXIT_OK
        assert "edge2d: PASS" in text

    def test_non_delaunay_pair_fails(self, tmp_path):
        # the long diagonal of a flat rhombus is not Delaunay
        v = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 0.3], [1.0, -0.3]])
        mesh = M.SimplicialMesh.from_arrays(v, np.array([[0, 1, 2], [1, 0, 3]]))
        path = tmp_path / "pair.mesh"
        M.write_mesh(mesh, path)
        code, text = _run(["certify", "--mesh", str(path), "--problem", "constant",
                           "--param", "diffusion=1 0 0 1", "--param", "convection=0 0",
                           "--condition", "edge2d"])
        assert code == cli.EXIT_FAIL
        assert "edge2d: FAIL" in text

    def test_csv_written(self, tmp_path):
        out = tmp_path / "margins.csv"
        code, _ = _run(["certify", "--family", "acute8", "--nx", "3", "--problem", "ex5.3",
                        "--condition", "all", "--csv", str(out)])
        assert code == cli.EXIT_FAIL
        assert (tmp_path / "margins_thm41.csv").exists()
        assert (tmp_path / "margins_edge2d.csv").exists()

    def test_invalid_mesh(self, tmp_path, capsys):
        path = tmp_path / "bad.mesh"
        # both triangles lie on the same side of their shared edge
        path.write_text(OVERLAP)
        code, _ = _run(["certify", "--mesh", str(path), "--problem", "ex5.1"])
        assert code == cli.EXIT_USAGE
        assert "FAIL" in capsys.readouterr().err

    def test_malformed_mesh(self, tmp_path, capsys):
        path = tmp_path / "bad.mesh"
        path.write_text("2 4 0\n")
        assert _run(["certify", "--mesh", str(path), "--problem", "ex5.1"])[0] == cli.EXIT_USAGE

    def test_missing_mesh_source(self):
        assert _run(["certify", "--problem", "ex5.1"])[0] == cli.EXIT_USAGE

    def test_edge2d_rejects_3d(self):
        code, _ = _run(["certify", "--family", "cube", "--nx", "2", "--problem", "constant",
                        "--param", "diffusion=1 0 0 0 1 0 0 0 1", "--param", "convection=0 0 0",
                        "--condition", "edge2d"])
        assert code == cli.EXIT_USAGE

    def test_not_spd_is_numerical(self):
        code, _ = _run(["certify", "--family", "right", "--nx", "2", "--problem", "constant",
                        "--param", "diffusion=1 2 2 1", "--param", "convection=0 0"])
        assert code == cli.EXIT_NUMERIC


class TestMesh:
    def test_gen_and_validate(self, tmp_path):
        path, vtk = tmp_path / "m.mesh", tmp_path / "m.vtk"
        code, text = _run(["mesh", "gen", "acute8", "--nx", "4", "-o", str(path), "--vtk", str(vtk)])
        assert code == cli.EXIT_OK
        assert "128 elements" in text
        assert vtk.read_text().startswith("# vtk DataFile Version")
        code, text = _run(["mesh", "validate", str(path)])
        assert code == cli.EXIT_OK and "PASS" in text
        assert M.read_mesh(path).n_elements == 128

    def test_gen_holed_and_cube(self, tmp_path):
        assert _run(["mesh", "gen", "holed", "--nx", "9"])[0] == cli.EXIT_OK
        assert _run(["mesh", "gen", "cube", "--nx", "2"])[0] == cli.EXIT_OK

    def test_validate_overlap(self, tmp_path):
        path = tmp_path / "bad.mesh"
        path.write_text(OVERLAP)
        code, text = _run(["mesh", "validate", str(path)])
        assert code == cli.EXIT_FAIL and "FAIL" in text

    def test_validate_missing_file(self, tmp_path):
        assert _run(["mesh", "validate", str(tmp_path / "x.mesh")])[0] == cli.EXIT_USAGE

    def test_bad_generator_arguments(self):
        assert _run(["mesh", "gen", "acute8"])[0] == cli.EXIT_USAGE
        assert _run(["mesh", "gen", "acute8", "--nx", "0"])[0] == cli.EXIT_USAGE


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dmpfem", "mesh", "gen", "right", "--nx", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "8 elements" in proc.stdout


@pytest.mark.parametrize("name", ["ex51_b_sweep.ini", "ex53_edge.ini"])
def test_shipped_configs_parse(name):
    from pathlib import Path

    cfg = cli.load_config(Path(__file__).parents[1] / "configs" / name)
    assert len(list(cfg.cells())) >= 4
