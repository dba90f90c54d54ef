import numpy as np
import pytest

from higa import (eval_hier, hierarchical_basis, initial_mesh, truncate)
from higa.hierbasis import ElementEvaluator, locate_element
from higa.splines import TensorBSplineIndex, eval_tensor, level_line

from conftest import corner_refined_mesh, tensor_knots


class TestBasisSelection:
    def test_unrefined_mesh_uses_all_level0_functions(self):
        mesh = initial_mesh(tensor_knots(2, (0.5,)))
        basis = hierarchical_basis(mesh)
        assert basis.n_funcs == 16
        assert all(f.level == 0 for f in basis.funcs)

    def test_boundary_count_on_unrefined_mesh(self):
        mesh = initial_mesh(tensor_knots(2, (0.5,)))
        basis = hierarchical_basis(mesh)
        # interior functions of a 4x4 tensor basis form the 2x2 inner block
        assert basis.n_dofs == 4

    def test_refinement_adds_fine_functions(self):
        mesh = corner_refined_mesh(p=2, rounds=2)
        basis = hierarchical_basis(mesh)
        levels = {f.level for f in basis.funcs}
        assert len(levels) >= 2 and max(levels) >= 1


class TestPartitionOfUnity:
    def test_truncated_sums_to_one(self, rng):
        mesh = corner_refined_mesh(p=2, rounds=3)
        basis = hierarchical_basis(mesh)
        ones = np.ones(basis.n_funcs)
        for s in rng.uniform(0, 1, size=(30, 2)):
            assert eval_hier(mesh, ones, s, which="truncated") == pytest.approx(
                1.0, abs=1e-11)

    def test_plain_dominates_truncated(self, rng):
        mesh = corner_refined_mesh(p=2, rounds=3)
        basis = hierarchical_basis(mesh)
        ones = np.ones(basis.n_funcs)
        for s in rng.uniform(0, 1, size=(20, 2)):
            plain = eval_hier(mesh, ones, s, which="plain")
            assert plain >= 1.0 - 1e-11


class TestTruncation:
    def test_truncation_shrinks_overlapping_functions(self, rng):
        mesh = corner_refined_mesh(p=2, rounds=3)
        basis = hierarchical_basis(mesh)
        # coarse functions overlapping the refined corner must lose mass there
        shrunk = False
        coarsest = min(f.level for f in basis.funcs)
        for k, f in enumerate(basis.funcs):
            if f.level != coarsest:
                continue
            one_hot = np.zeros(basis.n_funcs)
            one_hot[k] = 1.0
            for s in rng.uniform(0.0, 0.3, size=(10, 2)):
                plain = eval_hier(mesh, one_hot, s, which="plain")
                trunc = eval_hier(mesh, one_hot, s, which="truncated")
                assert trunc <= plain + 1e-13
                if trunc < plain - 1e-6:
                    shrunk = True
        assert shrunk

    def test_truncated_vanishes_where_plain_does(self, rng):
        mesh = corner_refined_mesh(p=2, rounds=2)
        basis = hierarchical_basis(mesh)
        f = basis.funcs[0]
        one_hot = np.zeros(basis.n_funcs)
        one_hot[0] = 1.0
        for s in rng.uniform(0, 1, size=(20, 2)):
            plain = eval_hier(mesh, one_hot, s, which="plain")
            trunc = eval_hier(mesh, one_hot, s, which="truncated")
            if plain == 0.0:
                assert trunc == 0.0
            assert trunc <= plain + 1e-13


class TestLocateAndEvaluate:
    def test_locate_element_finds_containing_cell(self, rng):
        mesh = corner_refined_mesh(p=2, rounds=3)
        for s in rng.uniform(0, 1, size=(25, 2)):
            elem = locate_element(mesh, s)
            lo, hi = mesh.element_box(elem)
            assert np.all(lo <= s) and np.all(s <= hi)

    def test_element_tables_match_tensor_evaluation(self):
        mesh = corner_refined_mesh(p=2, rounds=2)
        basis = hierarchical_basis(mesh)
        ev = ElementEvaluator(mesh, nders=1)
        elem = mesh.active[len(mesh.active) // 2]
        lo, hi = mesh.element_box(elem)
        pts = [np.linspace(a + 1e-3, b - 1e-3, 3) for a, b in zip(lo, hi)]
        pos, tabs = ev.tables(elem, pts)
        grid = [(x, y) for x in pts[0] for y in pts[1]]
        for r, fi in enumerate(pos):
            f = basis.funcs[fi]
            tkv = mesh.knots0
            for d in range(f.level):
                tkv = tkv.refined()
            idx = TensorBSplineIndex(f.level, f.idx)
            for q, s in enumerate(grid):
                assert tabs[(0, 0)][r, q] == pytest.approx(
                    eval_tensor(tkv, idx, s), abs=1e-12)
                fd = 1e-7
                val = (eval_tensor(tkv, idx, (s[0] + fd, s[1]))
                       - eval_tensor(tkv, idx, (s[0] - fd, s[1]))) / (2 * fd)
                assert tabs[(1, 0)][r, q] == pytest.approx(val, abs=1e-5)
