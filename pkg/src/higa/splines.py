"""Univariate and tensor-product B-splines on dyadically refined knot vectors.

All knot vectors live on [0, 1] and are p-open (the first and last knot have
multiplicity p+1).  Refinement inserts the midpoint of every nonempty knot
span, so every knot of every level is a dyadic rational and exactly
representable in binary floating point; knot comparisons below therefore use
plain equality.

Point evaluation is right-continuous at interior breakpoints and
left-continuous at the right end of a function's knot window.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "KnotVector",
    "TensorKnotVector",
    "TensorBSplineIndex",
    "LevelLine",
    "LazyLevelLine",
    "level_line",
    "line_two_scale",
    "eval_univariate",
    "eval_tensor",
    "refine_level",
    "two_scale",
    "ders_basis_funs",
    "basis_matrix",
    "univariate_two_scale",
]


@dataclass(frozen=True)
class KnotVector:
    """A p-open knot vector on [0, 1] with interior multiplicities <= p."""

    degree: int
    knots: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple(float(t) for t in self.knots))
        p, t = self.degree, self.knots
        if p < 1:
            raise InvalidInputError(f"degree must be >= 1, got {p}")
        if len(t) < 2 * (p + 1):
            raise InvalidInputError("knot vector too short for degree")
        if any(a > b for a, b in zip(t, t[1:])):
            raise InvalidInputError("knots must be nondecreasing")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise InvalidInputError("knot vector must span [0, 1]")
        if t[p] != 0.0 or t[-p - 1] != 1.0:
            raise InvalidInputError("knot vector must be p-open")
        for z in set(t):
            if 0.0 < z < 1.0 and t.count(z) > p:
                raise InvalidInputError(f"interior knot {z} has multiplicity > p")

    @property
    def num_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @functools.cached_property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.knots)))

    @property
    def num_cells(self) -> int:
        return len(self.breakpoints) - 1

    def local_knots(self, i: int) -> tuple[float, ...]:
        """Knot window of basis function i (p+2 knots)."""
        if not 0 <= i < self.num_basis:
            raise InvalidInputError(f"basis index {i} out of range")
        return self.knots[i : i + self.degree + 2]

    def support(self, i: int) -> tuple[float, float]:
        w = self.local_knots(i)
        return (w[0], w[-1])

    def refine(self) -> "KnotVector":
        """Insert the midpoint of every nonempty span (multiplicity 1)."""
        z = self.breakpoints
        mids = [(a + b) / 2.0 for a, b in zip(z, z[1:])]
        return KnotVector(self.degree, tuple(sorted(self.knots + tuple(mids))))


@dataclass(frozen=True)
class TensorKnotVector:
    """Per-direction knot vectors plus the dyadic refinement level."""

    kvs: tuple[KnotVector, ...]
    level: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kvs", tuple(self.kvs))
        if not self.kvs:
            raise InvalidInputError("need at least one direction")
        if self.level < 0:
            raise InvalidInputError("level must be >= 0")

    @property
    def dim(self) -> int:
        return len(self.kvs)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.kvs)

    @property
    def num_basis(self) -> tuple[int, ...]:
        return tuple(kv.num_basis for kv in self.kvs)

    def refined(self) -> "TensorKnotVector":
        return TensorKnotVector(tuple(kv.refine() for kv in self.kvs), self.level + 1)


@dataclass(frozen=True)
class TensorBSplineIndex:
    """Identifies one tensor-product B-spline: refinement level plus the
    per-direction function indices (0-based)."""

    level: int
    j: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "j", tuple(int(v) for v in self.j))
        if self.level < 0:
            raise InvalidInputError("level must be >= 0")


def refine_level(tkv: TensorKnotVector) -> TensorKnotVector:
    """Dyadic refinement: midpoint of every nonempty span, in each direction."""
    return tkv.refined()


def _bspl_value(u, i, p, x, top):
    # Cox-de Boor with the 0/0 := 0 convention.  `top` is the right end of the
    # outermost window; evaluation there takes the limit from the left.
    if p == 0:
        if u[i] <= x < u[i + 1]:
            return 1.0
        if x == u[i + 1] == top and u[i] < u[i + 1]:
            return 1.0
        return 0.0
    val = 0.0
    d1 = u[i + p] - u[i]
    if d1 > 0.0:
        val += (x - u[i]) / d1 * _bspl_value(u, i, p - 1, x, top)
    d2 = u[i + p + 1] - u[i + 1]
    if d2 > 0.0:
        val += (u[i + p + 1] - x) / d2 * _bspl_value(u, i + 1, p - 1, x, top)
    return val


def _bspl_deriv(u, i, p, x, top, r):
    if r == 0:
        return _bspl_value(u, i, p, x, top)
    if p == 0:
        return 0.0
    val = 0.0
    d1 = u[i + p] - u[i]
    if d1 > 0.0:
        val += p / d1 * _bspl_deriv(u, i, p - 1, x, top, r - 1)
    d2 = u[i + p + 1] - u[i + 1]
    if d2 > 0.0:
        val -= p / d2 * _bspl_deriv(u, i + 1, p - 1, x, top, r - 1)
    return val


def eval_univariate(local_knots, x: float, deriv_order: int = 0) -> float:
    """Evaluate one B-spline (or a derivative) from its knot window.

    `local_knots` holds p+2 nondecreasing reals for a degree-p function.
    Derivatives up to order 2 are supported; at breakpoints they are taken
    one-sided following the continuity convention stated in the module
    docstring.
    """
    u = tuple(float(t) for t in local_knots)
    p = len(u) - 2
    if p < 1:
        raise InvalidInputError("need at least 3 local knots (degree >= 1)")
    if any(a > b for a, b in zip(u, u[1:])):
        raise InvalidInputError("local knots must be nondecreasing")
    if deriv_order not in (0, 1, 2):
        raise InvalidInputError("deriv_order must be 0, 1 or 2")
    if u[0] == u[-1]:
        raise InvalidInputError("empty support")
    return _bspl_deriv(u, 0, p, float(x), u[-1], deriv_order)


def eval_tensor(tkv: TensorKnotVector, idx: TensorBSplineIndex, s, deriv=None) -> float:
    """Evaluate a tensor-product B-spline; `deriv` gives per-direction orders."""
    if idx.level != tkv.level:
        raise InvalidInputError("index level does not match knot vector level")
    if len(idx.j) != tkv.dim or len(s) != tkv.dim:
        raise InvalidInputError("dimension mismatch")
    if deriv is None:
        deriv = (0,) * tkv.dim
    out = 1.0
    for kv, j, x, r in zip(tkv.kvs, idx.j, s, deriv):
        out *= eval_univariate(kv.local_knots(j), x, r)
    return out


# -- two-scale relation -------------------------------------------------------

def _boehm_insert(t: np.ndarray, p: int, c: np.ndarray, x: float):
    """Insert knot x into (t, c); returns the enlarged pair."""
    s = int(np.searchsorted(t, x, side="right")) - 1
    new_t = np.insert(t, s + 1, x)
    n = len(c)
    new_c = np.empty(n + 1)
    new_c[: s - p + 1] = c[: s - p + 1]
    for j in range(s - p + 1, s + 1):
        d = t[j + p] - t[j]
        a = (x - t[j]) / d if d > 0.0 else 0.0
        new_c[j] = a * c[j] + (1.0 - a) * c[j - 1]
    new_c[s + 1 :] = c[s:]
    return new_t, new_c


def univariate_two_scale(knots_coarse: np.ndarray, p: int, i: int,
                         knots_fine: np.ndarray) -> list[tuple[int, float]]:
    """Expand coarse function i over the dyadically refined knot vector.

    Returns (fine index, coefficient) pairs with strictly positive
    coefficients.  Works on the p+2 local knots only, so the cost does not
    depend on the global knot vector size.
    """
    u = np.asarray(knots_coarse, float)[i : i + p + 2]
    # pad so that the function is a regular member of a local basis
    ext = np.concatenate([[u[0]] * p, u, [u[-1]] * p])
    coef = np.zeros(2 * p + 1)
    coef[p] = 1.0
    t = ext
    for a in range(p + 1):
        if u[a] < u[a + 1]:
            t, coef = _boehm_insert(t, p, coef, (u[a] + u[a + 1]) / 2.0)
    tf = np.asarray(knots_fine, float)
    out = []
    for w, c in enumerate(coef):
        if c <= 0.0:
            continue
        win = t[w : w + p + 2]
        j = int(np.searchsorted(tf, win[0], side="left"))
        while j + p + 2 <= len(tf) and tf[j] == win[0]:
            if np.array_equal(tf[j : j + p + 2], win):
                out.append((j, float(c)))
                break
            j += 1
        else:
            raise AssertionError("two-scale child window not found in fine knots")
    return out


def two_scale(tkv: TensorKnotVector, idx: TensorBSplineIndex) -> dict:
    """Coefficients of one tensor B-spline over the next-level basis.

    The defining identity  beta = sum_j c_j beta'_j  holds pointwise; all
    coefficients are positive and only children supported inside supp(beta)
    appear.
    """
    if idx.level != tkv.level:
        raise InvalidInputError("index level does not match knot vector level")
    fine = tkv.refined()
    per_dir = []
    for kv, kvf, j in zip(tkv.kvs, fine.kvs, idx.j):
        if not 0 <= j < kv.num_basis:
            raise InvalidInputError(f"basis index {j} out of range")
        per_dir.append(univariate_two_scale(np.array(kv.knots), kv.degree, j,
                                            np.array(kvf.knots)))
    out = {}
    for combo in product(*per_dir):
        jt = tuple(j for j, _ in combo)
        c = 1.0
        for _, ci in combo:
            c *= ci
        out[TensorBSplineIndex(tkv.level + 1, jt)] = c
    return out


# -- fast per-level univariate data -------------------------------------------

class LevelLine:
    """Univariate spline data for one direction at one refinement level.

    Stores the full knot and breakpoint arrays so that cell <-> span <->
    function lookups are O(log n) searchsorted calls.
    """

    __slots__ = ("degree", "knots", "breakpoints", "span_of_cell")

    def __init__(self, degree: int, knots: np.ndarray, breakpoints: np.ndarray,
                 span_of_cell: np.ndarray):
        self.degree = degree
        self.knots = knots
        self.breakpoints = breakpoints
        self.span_of_cell = span_of_cell

    @property
    def num_cells(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def num_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    def span(self, c: int) -> int:
        """Knot span index of cell c (index of the last knot <= its left end)."""
        return int(self.span_of_cell[c])

    def funcs_on_cell(self, c: int) -> range:
        """Indices of the p+1 functions that are nonzero on cell c."""
        s = int(self.span_of_cell[c])
        return range(s - self.degree, s + 1)

    def func_support(self, i: int) -> tuple[int, int]:
        """Support of function i as the half-open cell range [lo, hi)."""
        p = self.degree
        lo = int(np.searchsorted(self.breakpoints, self.knots[i]))
        hi = int(np.searchsorted(self.breakpoints, self.knots[i + p + 1]))
        return lo, hi

    def local_knots(self, i: int) -> np.ndarray:
        return self.knots[i : i + self.degree + 2]

    def cell_interval(self, c: int) -> tuple[float, float]:
        return float(self.breakpoints[c]), float(self.breakpoints[c + 1])

    def ders_window(self, span: int):
        """(knot array, span index into it) pair to feed ders_basis_funs."""
        return self.knots, span

    def cell_of_point(self, x: float, side: str = "right") -> int:
        """Cell containing x; `side` picks the cell at breakpoints."""
        c = int(np.searchsorted(self.breakpoints, x, side=side)) - 1
        return min(max(c, 0), self.num_cells - 1)


class LazyLevelLine:
    """Same interface as LevelLine, computed on demand from the level-0 data.

    A dyadically refined line has 2^level cells per level-0 cell; storing its
    arrays is exponential in the level even though an adaptive mesh only has
    a bounded number of active cells there.  This view answers every LevelLine
    query in O(p + level + log #level-0 cells) time and O(1) memory.  All
    breakpoint values are produced by the same nested-midpoint arithmetic as
    the dense construction, so they are bit-identical to LevelLine's.
    """

    __slots__ = ("degree", "level", "num_cells", "num_basis",
                 "_bp0", "_cum_extra", "_nc0", "_nknots")

    def __init__(self, kv0: KnotVector, level: int):
        p = kv0.degree
        self.degree = p
        self.level = level
        bp0 = kv0.breakpoints
        self._bp0 = bp0
        self._nc0 = len(bp0) - 1
        # extra knots (beyond one) carried by original interior breakpoints
        cum = [0] * self._nc0
        for q in range(1, self._nc0):
            cum[q] = cum[q - 1] + (kv0.knots.count(bp0[q]) - 1)
        self._cum_extra = cum
        self.num_cells = self._nc0 << level
        self.num_basis = kv0.num_basis + self._nc0 * ((1 << level) - 1)
        self._nknots = self.num_basis + p + 1

    # -- breakpoints -------------------------------------------------------

    def cell_interval(self, c: int) -> tuple[float, float]:
        q, r = divmod(int(c), 1 << self.level)
        lo, hi = self._bp0[q], self._bp0[q + 1]
        for k in range(self.level - 1, -1, -1):
            mid = (lo + hi) / 2.0
            if (r >> k) & 1:
                lo = mid
            else:
                hi = mid
        return lo, hi

    def _bp(self, c: int) -> float:
        if c == self.num_cells:
            return self._bp0[-1]
        return self.cell_interval(c)[0]

    def cell_of_point(self, x: float, side: str = "right") -> int:
        q = int(np.searchsorted(self._bp0, x, side=side)) - 1
        q = min(max(q, 0), self._nc0 - 1)
        lo, hi = self._bp0[q], self._bp0[q + 1]
        r = 0
        for _ in range(self.level):
            mid = (lo + hi) / 2.0
            go_right = x >= mid if side == "right" else x > mid
            r = (r << 1) | int(go_right)
            if go_right:
                lo = mid
            else:
                hi = mid
        return (q << self.level) + r

    # -- spans and functions -----------------------------------------------

    def span(self, c: int) -> int:
        return self.degree + int(c) + self._cum_extra[int(c) >> self.level]

    def funcs_on_cell(self, c: int) -> range:
        s = self.span(c)
        return range(s - self.degree, s + 1)

    def _knot_cell(self, i: int) -> int:
        """Breakpoint/cell index whose value equals knot i (num_cells for the
        right end)."""
        if not 0 <= i < self._nknots:
            raise InvalidInputError(f"knot index {i} out of range")
        if i <= self.degree:
            return 0
        if i >= self._nknots - self.degree - 1:
            return self.num_cells
        lo, hi = 1, self.num_cells - 1   # smallest c with span(c) >= i
        while lo < hi:
            mid = (lo + hi) // 2
            if self.span(mid) >= i:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def _knot_value(self, i: int) -> float:
        return self._bp(self._knot_cell(i))

    def func_support(self, i: int) -> tuple[int, int]:
        return self._knot_cell(i), self._knot_cell(i + self.degree + 1)

    def local_knots(self, i: int) -> np.ndarray:
        return np.array([self._knot_value(k)
                         for k in range(i, i + self.degree + 2)])

    def ders_window(self, span: int):
        p = self.degree
        win = np.array([self._knot_value(k)
                        for k in range(span - p, span + p + 2)])
        return win, p


# A level-0 line with up to this many cells at the requested level is
# materialized (fast vectorized lookups); deeper levels get the lazy view.
_DENSE_CELL_LIMIT = 1 << 14


@functools.lru_cache(maxsize=None)
def level_line(kv0: KnotVector, level: int):
    """Per-level univariate data derived from the level-0 knot vector."""
    if kv0.num_cells << level > _DENSE_CELL_LIMIT:
        return LazyLevelLine(kv0, level)
    if level == 0:
        knots = np.array(kv0.knots)
        bp = np.array(kv0.breakpoints)
    else:
        prev = level_line(kv0, level - 1)
        mids = (prev.breakpoints[:-1] + prev.breakpoints[1:]) / 2.0
        knots = np.sort(np.concatenate([prev.knots, mids]), kind="mergesort")
        bp = np.empty(2 * prev.num_cells + 1)
        bp[0::2] = prev.breakpoints
        bp[1::2] = mids
    span_of_cell = np.searchsorted(knots, bp[:-1], side="right") - 1
    return LevelLine(kv0.degree, knots, bp, span_of_cell.astype(np.int64))


def line_two_scale(coarse, fine, i: int) -> list[tuple[int, float]]:
    """Two-scale expansion of function i of a level line over the next level.

    Same contract as univariate_two_scale but works through the LevelLine
    interface, so it never touches the full knot arrays.
    """
    p = coarse.degree
    u = np.asarray(coarse.local_knots(i), float)
    ext = np.concatenate([[u[0]] * p, u, [u[-1]] * p])
    coef = np.zeros(2 * p + 1)
    coef[p] = 1.0
    t = ext
    for a in range(p + 1):
        if u[a] < u[a + 1]:
            t, coef = _boehm_insert(t, p, coef, (u[a] + u[a + 1]) / 2.0)
    lo, hi = coarse.func_support(i)
    jlo = max(fine.span(2 * lo) - p, 0)
    jhi = fine.span(2 * hi - 1)
    out = []
    for w, c in enumerate(coef):
        if c <= 0.0:
            continue
        win = t[w : w + p + 2]
        for j in range(jlo, jhi + 1):
            if np.array_equal(np.asarray(fine.local_knots(j), float), win):
                out.append((j, float(c)))
                break
        else:
            raise AssertionError("two-scale child window not found in fine knots")
    return out


# -- vectorized span evaluation -----------------------------------------------

def ders_basis_funs(t: np.ndarray, p: int, span: int, xs, n: int) -> np.ndarray:
    """Values and derivatives of the p+1 B-splines alive on one knot span.

    Evaluates functions span-p .. span at all points xs (assumed to lie in
    [t[span], t[span+1]]); returns shape (n+1, p+1, len(xs)).  Points on the
    span boundary get the polynomial extension of this span, which is how
    one-sided limits are obtained.
    """
    xs = np.atleast_1d(np.asarray(xs, float))
    m = xs.size
    ndu = np.ones((p + 1, p + 1, m))
    left = np.empty((p + 1, m))
    right = np.empty((p + 1, m))
    for j in range(1, p + 1):
        left[j] = xs - t[span + 1 - j]
        right[j] = t[span + j] - xs
        saved = np.zeros(m)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    ders = np.zeros((n + 1, p + 1, m))
    for r in range(p + 1):
        ders[0, r] = ndu[r, p]
    a = np.zeros((2, p + 1, m))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[0, 0] = 1.0
        for k in range(1, min(n, p) + 1):
            d = np.zeros(m)
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1
    fac = float(p)
    for k in range(1, min(n, p) + 1):
        ders[k] *= fac
        fac *= p - k
    return ders


def basis_matrix(kv: KnotVector, x, nders: int = 0,
                 side: str = "right") -> np.ndarray:
    """All basis functions of a knot vector at arbitrary points.

    Returns shape (nders+1, num_basis, len(x)).  With side="right" (default)
    values are right-continuous at interior breakpoints and left-continuous
    at x = 1; side="left" evaluates the left-limit at interior breakpoints
    instead, which is needed for one-sided normal fluxes across lines where
    the spline is not smooth.
    """
    x = np.atleast_1d(np.asarray(x, float))
    t = np.array(kv.knots)
    p = kv.degree
    spans = np.searchsorted(t, x, side=side) - 1
    spans = np.clip(spans, p, len(t) - p - 2)
    out = np.zeros((nders + 1, kv.num_basis, x.size))
    for s in np.unique(spans):
        sel = np.nonzero(spans == s)[0]
        tab = ders_basis_funs(t, p, int(s), x[sel], nders)
        for r in range(p + 1):
            out[:, s - p + r, sel] = tab[:, r, :]
    return out
