import numpy as np
import scipy.io

from higa import HierarchicalMesh
from higa.cli import EXIT_CONFIG, EXIT_OK, main


class TestRun:
    def test_run_writes_history(self, tmp_path, capsys):
        out = tmp_path / "history.csv"
        code = main(["run", "--problem", "square", "--degree", "2",
                     "--max-steps", "2", "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("step,")
        assert len(lines) == 4
        assert "step" in capsys.readouterr().out

    def test_uniform_mode(self, tmp_path):
        out = tmp_path / "u.csv"
        code = main(["run", "--problem", "quarter-ring", "--degree", "2",
                     "--mode", "uniform", "--max-steps", "2",
                     "--out", str(out)])
        assert code == EXIT_OK
        rows = out.read_text().strip().splitlines()[1:]
        assert [r.split(",")[1] for r in rows] == ["4", "16", "64"]

    def test_bad_degree_is_rejected_by_argparse(self):
        import pytest
        with pytest.raises(SystemExit):
            main(["run", "--problem", "square", "--degree", "7"])


class TestVerifyAxioms:
    def test_small_run_passes(self, capsys):
        code = main(["verify-axioms", "--trials", "6"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "partition_of_unity" in out and "FAILED" not in out


class TestDumps:
    def test_dump_mesh_roundtrips(self, tmp_path):
        out = tmp_path / "mesh.txt"
        code = main(["dump-mesh", "--problem", "lshape", "--degree", "2",
                     "--steps", "3", "--out", str(out)])
        assert code == EXIT_OK
        mesh = HierarchicalMesh.from_text(out.read_text())
        assert mesh.n_elements >= 4

    def test_dump_system(self, tmp_path):
        out = tmp_path / "system.mtx"
        code = main(["dump-system", "--problem", "square", "--degree", "2",
                     "--steps", "2", "--out", str(out)])
        assert code == EXIT_OK
        mat = scipy.io.mmread(str(out))
        assert mat.shape[0] == mat.shape[1] > 0
        rhs = np.loadtxt(str(out) + ".rhs")
        assert rhs.shape == (mat.shape[0],)
