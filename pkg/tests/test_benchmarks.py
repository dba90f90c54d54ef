import numpy as np
import pytest

from higa import ConfigError, problem_library, write_history_csv
from higa.benchmarks import PROBLEM_NAMES, initial_knots


class TestInitialKnots:
    def test_square_is_bezier(self):
        tkv = initial_knots("square", 3)
        for kv in tkv.kvs:
            assert kv.breakpoints == (0.0, 1.0)
            assert kv.degree == 3

    def test_lshape_has_c0_line_in_first_direction(self):
        tkv = initial_knots("lshape", 2)
        assert tkv.kvs[0].knots.count(0.5) == 2   # multiplicity p
        assert tkv.kvs[1].breakpoints == (0.0, 1.0)

    def test_quarter_ring_has_c0_lines_in_both_directions(self):
        tkv = initial_knots("quarter_ring", 3)
        for kv in tkv.kvs:
            assert kv.knots.count(0.5) == 3


class TestProblemLibrary:
    def test_names_and_thetas(self):
        assert set(PROBLEM_NAMES) == {"square", "lshape", "quarter_ring"}
        assert problem_library("square", 2).default_theta == 0.5
        assert problem_library("lshape", 2).default_theta == 0.4
        assert problem_library("quarter_ring", 2).default_theta == 0.8

    def test_unknown_problem(self):
        with pytest.raises(ConfigError):
            problem_library("cube", 2)

    def test_square_f_matches_exact_solution(self, rng):
        # f must equal -Laplace(u) for u = x^2.3 (1-x) y^2.9 (1-y)
        bench = problem_library("square", 2)
        h = 1e-5
        for s in rng.uniform(0.1, 0.9, size=(10, 2)):
            x, y = s

            def u(a, b):
                return a ** 2.3 * (1 - a) * b ** 2.9 * (1 - b)

            lap = (u(x + h, y) - 2 * u(x, y) + u(x - h, y)) / h ** 2 \
                + (u(x, y + h) - 2 * u(x, y) + u(x, y - h)) / h ** 2
            f = bench.problem.f(np.array([s]), np.array([s]))[0]
            assert f == pytest.approx(-lap, rel=1e-4)

    def test_square_gradient_matches_solution(self, rng):
        bench = problem_library("square", 2)
        h = 1e-6
        for s in rng.uniform(0.1, 0.9, size=(5, 2)):
            x, y = s

            def u(a, b):
                return a ** 2.3 * (1 - a) * b ** 2.9 * (1 - b)

            g = bench.exact_gradient(np.array([s]), np.array([s]))[0]
            assert g[0] == pytest.approx((u(x + h, y) - u(x - h, y)) / (2 * h),
                                         abs=1e-7)
            assert g[1] == pytest.approx((u(x, y + h) - u(x, y - h)) / (2 * h),
                                         abs=1e-7)

    def test_quarter_ring_load_is_parameter_indicator(self):
        bench = problem_library("quarter_ring", 2)
        s = np.array([[0.7, 0.2], [0.2, 0.2], [0.7, 0.7], [0.5, 0.5]])
        x = bench.geometry.map_points(s)
        assert list(bench.problem.f(x, s)) == [1.0, 0.0, 0.0, 1.0]


class TestHistoryCsv:
    def test_format(self, tmp_path):
        from higa import StopRule, adaptive_loop
        bench = problem_library("square", 2)
        history = adaptive_loop(bench.problem, bench.geometry, bench.knots0,
                                stop=StopRule(max_steps=2, max_dofs=10 ** 9),
                                exact_gradient=bench.exact_gradient)
        path = tmp_path / "history.csv"
        write_history_csv(history, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,n_elements,n_dofs,max_level,estimator,energy_error"
        assert len(lines) == len(history) + 1
        first = lines[1].split(",")
        assert first[0] == "0" and float(first[4]) > 0
