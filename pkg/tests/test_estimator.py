import numpy as np
import pytest

from higa import (InvalidInputError, PDEProblem, assemble, benchmark_geometry,
                  estimate, facets, initial_mesh, solve)
from higa.estimator import dump_indicators

from conftest import corner_refined_mesh, tensor_knots
from test_assembly import bubble_problem


class TestFacets:
    def test_uniform_2x2(self):
        mesh = initial_mesh(tensor_knots(1, (0.5,)))
        fs = facets(mesh)
        assert len(fs) == 4
        assert all(f.hi - f.lo == 0.5 for f in fs)
        for f in fs:
            assert f.minus != f.plus

    def test_hanging_interface_splits_on_fine_side(self):
        mesh = corner_refined_mesh(p=1, rounds=1)
        fs = facets(mesh)
        # adjacent pairs stay constant along every facet
        for f in fs:
            lo_m, hi_m = mesh.element_box(f.minus)
            lo_p, hi_p = mesh.element_box(f.plus)
            assert hi_m[f.axis] == f.coord == lo_p[f.axis]
            t = 1 - f.axis
            assert lo_m[t] <= f.lo and f.hi <= hi_m[t]
            assert lo_p[t] <= f.lo and f.hi <= hi_p[t]

    def test_every_interior_interface_is_covered(self):
        mesh = corner_refined_mesh(p=2, rounds=2)
        fs = facets(mesh)
        # total facet length equals the summed interior boundary length,
        # counting each interface once
        per_axis = {0: 0.0, 1: 0.0}
        for f in fs:
            per_axis[f.axis] += f.hi - f.lo
        total = 0.0
        for elem in mesh.active:
            lo, hi = mesh.element_box(elem)
            for axis in (0, 1):
                if hi[axis] != 1.0:
                    total += hi[1 - axis] - lo[1 - axis]
        assert per_axis[0] + per_axis[1] == pytest.approx(total, abs=1e-12)


class TestIndicators:
    def test_exact_discrete_solution_has_tiny_eta(self):
        mesh = initial_mesh(tensor_knots(2))
        geom = benchmark_geometry("square")
        problem, _ = bubble_problem()
        coeffs = solve(assemble(mesh, geom, problem))
        ind = estimate(mesh, geom, problem, coeffs)
        assert ind.eta < 1e-8

    def test_hat_function_jump_oracle(self):
        # U = hat(x)hat(y) on the 2x2 piecewise-linear mesh, f = 0: the
        # residual vanishes per element; each element touches two interior
        # facets, each with squared jump integral int_0^0.5 (8t)^2 dt = 8/3,
        # weighted by |T|^(1/2) = 1/2
        mesh = initial_mesh(tensor_knots(1, (0.5,)))
        geom = benchmark_geometry("square")
        problem = PDEProblem.poisson(lambda x, s: np.zeros(len(x)))
        ind = estimate(mesh, geom, problem, np.array([1.0]))
        assert np.allclose(ind.volume_sq, 0.0, atol=1e-13)
        assert np.allclose(ind.jump_sq, 0.5 * (8.0 / 3.0 + 8.0 / 3.0),
                           atol=1e-12)
        assert ind.total == pytest.approx(4 * 8.0 / 3.0, rel=1e-12)

    def test_smooth_basis_has_no_jumps(self):
        # C^1 quadratic splines have continuous normal flux
        mesh = initial_mesh(tensor_knots(2, (0.25, 0.5, 0.75)))
        geom = benchmark_geometry("square")
        problem, _ = bubble_problem()
        coeffs = solve(assemble(mesh, geom, problem))
        ind = estimate(mesh, geom, problem, coeffs)
        assert np.max(ind.jump_sq) < 1e-20

    def test_dimension_guard(self):
        from higa import KnotVector, TensorKnotVector
        kv = KnotVector(1, (0.0, 0.0, 1.0, 1.0))
        mesh = initial_mesh(TensorKnotVector((kv,)))
        with pytest.raises(InvalidInputError):
            facets(mesh)

    def test_dump_format(self, tmp_path):
        mesh = initial_mesh(tensor_knots(1, (0.5,)))
        geom = benchmark_geometry("square")
        problem = PDEProblem.poisson(lambda x, s: np.zeros(len(x)))
        ind = estimate(mesh, geom, problem, np.array([1.0]))
        path = tmp_path / "ind.txt"
        dump_indicators(ind, str(path))
        lines = path.read_text().strip().splitlines()
        assert len(lines) == mesh.n_elements
        level, cx, cy, vol, jump = lines[0].split()
        assert int(level) == 0
        assert float(jump) > 0.0
