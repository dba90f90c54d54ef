import numpy as np
import pytest

from higa import (InvalidInputError, KnotVector, TensorBSplineIndex,
                  TensorKnotVector, eval_tensor, eval_univariate, refine_level,
                  two_scale)
from higa.splines import (basis_matrix, ders_basis_funs, level_line,
                          univariate_two_scale)

from conftest import open_knots, tensor_knots


class TestKnotVector:
    def test_open_structure(self):
        kv = open_knots(2, (0.5,))
        assert kv.num_basis == 4
        assert kv.breakpoints == (0.0, 0.5, 1.0)
        assert kv.num_cells == 2

    def test_local_knots_and_support(self):
        kv = open_knots(2, (0.25, 0.5, 0.75))
        assert kv.local_knots(0) == (0.0, 0.0, 0.0, 0.25)
        assert kv.support(0) == (0.0, 0.25)
        assert kv.support(kv.num_basis - 1) == (0.75, 1.0)

    def test_refine_inserts_midpoints(self):
        kv = open_knots(2, (0.5,))
        assert kv.refine().breakpoints == (0.0, 0.25, 0.5, 0.75, 1.0)
        # interior multiplicities are preserved
        kv2 = KnotVector(2, (0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0))
        assert kv2.refine().knots.count(0.5) == 2

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            KnotVector(2, (0.0, 0.0, 1.0, 1.0))          # not p-open
        with pytest.raises(InvalidInputError):
            KnotVector(1, (0.0, 0.0, 0.7, 0.3, 1.0, 1.0))  # not sorted
        with pytest.raises(InvalidInputError):
            KnotVector(-1, (0.0, 1.0))


class TestEvalUnivariate:
    def test_uniform_quadratic_midpoint(self):
        # B-spline with uniform local knots, evaluated mid-support
        assert eval_univariate((0.0, 0.25, 0.5, 0.75), 0.375) == pytest.approx(
            0.75, abs=1e-14)

    def test_bernstein_values(self):
        # open knots with no interior knots give Bernstein polynomials
        kv = open_knots(3)
        x = 0.3
        for i in range(4):
            from math import comb
            expect = comb(3, i) * x ** i * (1 - x) ** (3 - i)
            assert eval_univariate(kv.local_knots(i), x) == pytest.approx(
                expect, abs=1e-14)

    def test_endpoint_interpolation(self):
        kv = open_knots(2, (0.5,))
        assert eval_univariate(kv.local_knots(0), 0.0) == 1.0
        assert eval_univariate(kv.local_knots(kv.num_basis - 1), 1.0) == 1.0

    def test_outside_support_is_zero(self):
        kv = open_knots(2, (0.25, 0.5, 0.75))
        assert eval_univariate(kv.local_knots(0), 0.9) == 0.0

    def test_derivative_matches_finite_difference(self):
        kv = open_knots(3, (0.25, 0.5, 0.75))
        h = 1e-6
        for i in range(kv.num_basis):
            lk = kv.local_knots(i)
            for x in (0.1, 0.3, 0.62):
                fd = (eval_univariate(lk, x + h) - eval_univariate(lk, x - h)) / (2 * h)
                assert eval_univariate(lk, x, 1) == pytest.approx(fd, abs=1e-6)

    def test_partition_of_unity(self):
        kv = open_knots(3, (0.2, 0.45, 0.7))
        for x in (0.0, 0.13, 0.45, 0.99, 1.0):
            total = sum(eval_univariate(kv.local_knots(i), x)
                        for i in range(kv.num_basis))
            assert total == pytest.approx(1.0, abs=1e-13)


class TestTensor:
    def test_eval_tensor_separates(self):
        tkv = tensor_knots(2, (0.5,))
        idx = TensorBSplineIndex(0, (1, 2))
        s = (0.3, 0.7)
        expect = np.prod([
            eval_univariate(tkv.kvs[d].local_knots(idx.j[d]), s[d])
            for d in range(2)])
        assert eval_tensor(tkv, idx, s) == pytest.approx(expect, abs=1e-14)

    def test_refine_level(self):
        tkv = tensor_knots(2, (0.5,))
        fine = refine_level(tkv)
        assert fine.kvs[0].breakpoints == (0.0, 0.25, 0.5, 0.75, 1.0)


class TestTwoScale:
    def test_hat_function(self):
        kc = np.array([0.0, 0.0, 0.5, 1.0, 1.0])
        kf = np.array([0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0])
        assert univariate_two_scale(kc, 1, 1, kf) == [
            (1, 0.5), (2, 1.0), (3, 0.5)]

    def test_uniform_quadratic_weights(self):
        # interior quadratic B-spline refines with weights (1/4, 3/4, 3/4, 1/4)
        kc = np.array([0.0, 0.0, 0.0] + [i / 8 for i in range(1, 8)]
                      + [1.0, 1.0, 1.0])
        kf = np.array([0.0, 0.0, 0.0] + [i / 16 for i in range(1, 16)]
                      + [1.0, 1.0, 1.0])
        out = univariate_two_scale(kc, 2, 4, kf)
        assert [c for _, c in out] == pytest.approx([0.25, 0.75, 0.75, 0.25])

    def test_pointwise_identity_and_nonnegativity(self, rng):
        tkv = tensor_knots(3, (0.5, 0.5))
        fine = tkv.refined()
        for j in [(0, 0), (2, 3), (4, 1)]:
            idx = TensorBSplineIndex(0, j)
            children = two_scale(tkv, idx)
            assert all(c >= 0.0 for c in children.values())
            for s in rng.uniform(0, 1, size=(20, 2)):
                lhs = eval_tensor(tkv, idx, s)
                rhs = sum(c * eval_tensor(fine, ci, s)
                          for ci, c in children.items())
                assert lhs == pytest.approx(rhs, abs=1e-12)


class TestVectorizedTables:
    def test_ders_basis_funs_matches_scalar_eval(self, rng):
        kv = open_knots(3, (0.25, 0.5, 0.75))
        line = level_line(kv, 0)
        span = line.span_of_cell[1]          # cell [0.25, 0.5]
        xs = rng.uniform(0.25, 0.5, size=7)
        table = ders_basis_funs(np.asarray(line.knots), 3, span, xs, 2)
        for r, i in enumerate(range(span - 3, span + 1)):
            lk = kv.local_knots(i)
            for q, x in enumerate(xs):
                for der in range(3):
                    assert table[der, r, q] == pytest.approx(
                        eval_univariate(lk, x, der), abs=1e-11)

    def test_basis_matrix_rows(self, rng):
        kv = open_knots(2, (0.5,))
        xs = np.array([0.1, 0.5, 0.9])
        mat = basis_matrix(kv, xs, nders=1)
        for i in range(kv.num_basis):
            for q, x in enumerate(xs):
                assert mat[0, i, q] == pytest.approx(
                    eval_univariate(kv.local_knots(i), x), abs=1e-13)


class TestLazyLevelLine:
    """Deep levels are served by an O(1)-memory view; it must agree with the
    dense representation query for query, bit for bit."""

    @pytest.mark.parametrize("knots", [
        (0.0,) * 3 + (0.5, 0.5) + (1.0,) * 3,
        (0.0,) * 4 + (0.25, 0.5, 0.5, 0.5, 0.75) + (1.0,) * 4,
        (0.0,) * 2 + (1.0,) * 2,
    ])
    def test_matches_dense(self, knots, rng):
        from higa.splines import LazyLevelLine, LevelLine

        p = knots.count(0.0) - 1
        kv = KnotVector(p, knots)
        for level in range(5):
            kvl = kv
            for _ in range(level):
                kvl = kvl.refine()
            dk = np.array(kvl.knots)
            dbp = np.array(kvl.breakpoints)
            soc = np.searchsorted(dk, dbp[:-1], side="right") - 1
            dense = LevelLine(p, dk, dbp, soc.astype(np.int64))
            lazy = LazyLevelLine(kv, level)
            assert (lazy.num_cells, lazy.num_basis) == \
                (dense.num_cells, dense.num_basis)
            for c in range(dense.num_cells):
                assert lazy.span(c) == dense.span(c)
                assert lazy.cell_interval(c) == dense.cell_interval(c)
            for i in range(dense.num_basis):
                assert lazy.func_support(i) == dense.func_support(i)
                assert np.array_equal(lazy.local_knots(i),
                                      dense.local_knots(i))
            for x in [0.0, 0.5, 1.0, *rng.uniform(0, 1, 6)]:
                assert lazy.cell_of_point(x) == dense.cell_of_point(x)

    def test_ders_window_evaluates_like_dense(self, rng):
        from higa.splines import LazyLevelLine

        kv = open_knots(2, (0.5, 0.5))
        lazy = LazyLevelLine(kv, 3)
        line = level_line(kv, 3)
        for c in rng.integers(0, lazy.num_cells, size=6):
            span = lazy.span(int(c))
            assert span == line.span(int(c))
            a, b = lazy.cell_interval(int(c))
            xs = np.linspace(a, b, 4)
            wl, sl = lazy.ders_window(span)
            wd, sd = line.ders_window(span)
            assert np.array_equal(
                ders_basis_funs(wl, 2, sl, xs, 2),
                ders_basis_funs(wd, 2, sd, xs, 2))

    def test_deep_level_is_lazy_and_cheap(self):
        from higa.splines import LazyLevelLine

        kv = open_knots(3, (0.5,))
        line = level_line(kv, 40)
        assert isinstance(line, LazyLevelLine)
        assert line.num_cells == 2 ** 41
        c = line.num_cells // 3
        lo, hi = line.cell_interval(c)
        assert 0.0 < lo < hi < 1.0
        assert hi - lo == pytest.approx(2.0 ** -41, rel=1e-12)
        i = line.funcs_on_cell(c)[0]
        assert line.func_support(i)[0] <= c < line.func_support(i)[1]
