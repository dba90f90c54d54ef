"""Hierarchical B-spline bases, truncation and point evaluation.

The basis of a hierarchical mesh collects, level by level, the tensor
B-splines whose support is contained in that level's subdomain but not in the
next one.  Functions are ordered by (level, lexicographic index), which fixes
the meaning of coefficient vectors everywhere in the package.

Truncation is the single-step variant: expand a function over the next-level
tensor basis and drop the children supported inside the next subdomain.  On
admissible meshes this coincides with the full multilevel truncation.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import InvalidInputError
from .hiermesh import ActiveElement, HierarchicalMesh
from .splines import ders_basis_funs, eval_univariate, line_two_scale

__all__ = [
    "HierBasisFunction",
    "HierarchicalBasis",
    "TruncatedFunction",
    "hierarchical_basis",
    "boundary_basis",
    "truncate",
    "eval_hier",
    "collocation_matrix",
    "locate_element",
    "ElementEvaluator",
]


@dataclass(frozen=True, order=True)
class HierBasisFunction:
    level: int
    idx: tuple[int, ...]
    vanishes_on_boundary: bool = field(compare=False)


class HierarchicalBasis:
    """The hierarchical basis of a mesh plus element-to-function scatter maps."""

    def __init__(self, mesh: HierarchicalMesh):
        self.mesh = mesh
        funcs = []
        for lvl in range(mesh.max_level):
            lines = mesh.lines(lvl)
            if lvl == 0:
                cand = product(*(range(ln.num_basis) for ln in lines))
                keep = sorted(j for j in cand if mesh.func_in_basis(0, j))
            else:
                cand = set()
                for cell in mesh.domains[lvl]:
                    cand.update(mesh._funcs_containing(lvl, cell))
                keep = sorted(j for j in cand if mesh.func_in_basis(lvl, j))
            nb = [ln.num_basis for ln in lines]
            for j in keep:
                interior = all(0 < ji < n - 1 for ji, n in zip(j, nb))
                funcs.append(HierBasisFunction(lvl, j, interior))
        self.funcs = tuple(funcs)
        self.pos = {(f.level, f.idx): i for i, f in enumerate(funcs)}
        self.boundary = tuple(i for i, f in enumerate(funcs)
                              if f.vanishes_on_boundary)
        elem_funcs: dict[ActiveElement, list] = {e: [] for e in mesh.active}
        for i, f in enumerate(funcs):
            for elem in mesh._support_actives(f.level, f.idx):
                elem_funcs[elem].append(i)
        self.element_funcs = {e: np.array(v, dtype=np.int64)
                              for e, v in elem_funcs.items()}
        self.func_levels = np.array([f.level for f in funcs], dtype=np.int64)
        self.func_idx = np.array([f.idx for f in funcs], dtype=np.int64) \
            if funcs else np.zeros((0, mesh.dim), dtype=np.int64)
        self._trunc_cache: dict = {}

    @property
    def n_funcs(self) -> int:
        return len(self.funcs)

    @property
    def n_dofs(self) -> int:
        """Number of boundary-vanishing functions (the Galerkin unknowns)."""
        return len(self.boundary)

    def truncated(self, f: HierBasisFunction) -> "TruncatedFunction":
        tf = self._trunc_cache.get((f.level, f.idx))
        if tf is None:
            tf = truncate(self.mesh, f)
            self._trunc_cache[(f.level, f.idx)] = tf
        return tf


@functools.lru_cache(maxsize=16)
def hierarchical_basis(mesh: HierarchicalMesh) -> HierarchicalBasis:
    return HierarchicalBasis(mesh)


def boundary_basis(mesh: HierarchicalMesh) -> tuple[HierBasisFunction, ...]:
    """The basis functions vanishing on the parameter-box boundary."""
    basis = hierarchical_basis(mesh)
    return tuple(basis.funcs[i] for i in basis.boundary)


@dataclass
class TruncatedFunction:
    """Single-step truncation of a hierarchical basis function.

    child_indices holds, per direction, the next-level univariate children of
    the base function; coeffs is the tensor of two-scale coefficients with
    dropped children zeroed out.
    """

    base: HierBasisFunction
    child_indices: tuple[tuple[int, ...], ...]
    coeffs: np.ndarray

    @property
    def fine_coeffs(self) -> dict:
        out = {}
        for combo in product(*(range(len(ci)) for ci in self.child_indices)):
            c = self.coeffs[combo]
            if c != 0.0:
                out[tuple(ci[k] for ci, k in zip(self.child_indices, combo))] = float(c)
        return out


def truncate(mesh: HierarchicalMesh, f: HierBasisFunction) -> TruncatedFunction:
    """Drop the two-scale children supported inside the next subdomain."""
    basis = hierarchical_basis(mesh)
    if (f.level, f.idx) not in basis.pos:
        raise InvalidInputError("function is not in the hierarchical basis")
    lvl = f.level
    coarse = mesh.lines(lvl)
    fine = mesh.lines(lvl + 1)
    per_dir = [line_two_scale(lc, lf, ji)
               for lc, lf, ji in zip(coarse, fine, f.idx)]
    child_indices = tuple(tuple(j for j, _ in pd) for pd in per_dir)
    coeffs = np.ones(())
    for pd in per_dir:
        coeffs = np.multiply.outer(coeffs, np.array([c for _, c in pd]))
    if lvl + 1 < len(mesh.domains):
        nxt = mesh.domains[lvl + 1]
        supports = [[ln.func_support(j) for j in ci]
                    for ln, ci in zip(fine, child_indices)]
        for combo in product(*(range(len(ci)) for ci in child_indices)):
            ranges = [supports[d][k] for d, k in enumerate(combo)]
            inside = all(cell in nxt
                         for cell in product(*(range(lo, hi) for lo, hi in ranges)))
            if inside:
                coeffs[combo] = 0.0
    return TruncatedFunction(f, child_indices, coeffs)


# -- point evaluation ----------------------------------------------------------

def locate_element(mesh: HierarchicalMesh, s) -> ActiveElement:
    """Active element containing the point; ties at breakpoints go to the
    element on the larger-coordinate side."""
    s = np.asarray(s, float)
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise InvalidInputError("point outside the parameter box")
    for lvl in range(mesh.max_level):
        lines = mesh.lines(lvl)
        cell = tuple(ln.cell_of_point(x) for ln, x in zip(lines, s))
        elem = ActiveElement(lvl, cell)
        if elem in mesh.active_set:
            return elem
    raise InvalidInputError(f"no active element contains {tuple(s)}")


def _eval_plain(mesh, f: HierBasisFunction, s, deriv) -> float:
    lines = mesh.lines(f.level)
    out = 1.0
    for ln, ji, x, r in zip(lines, f.idx, s, deriv):
        out *= eval_univariate(ln.local_knots(ji), x, r)
    return out


def _eval_truncated(mesh, basis, f: HierBasisFunction, s, deriv) -> float:
    tf = basis.truncated(f)
    fine = mesh.lines(f.level + 1)
    vecs = []
    for ln, ci, x, r in zip(fine, tf.child_indices, s, deriv):
        vecs.append(np.array([eval_univariate(ln.local_knots(j), x, r)
                              for j in ci]))
    acc = tf.coeffs
    for v in vecs:
        acc = np.tensordot(acc, v, axes=([0], [0]))
    return float(acc)


def eval_hier(mesh: HierarchicalMesh, coeffs, s, deriv=None,
              which: str = "plain") -> float:
    """Evaluate a linear combination of the (plain or truncated) hierarchical
    basis at one parameter point.  `coeffs` follows the hierarchical_basis
    ordering."""
    basis = hierarchical_basis(mesh)
    coeffs = np.asarray(coeffs, float)
    if coeffs.shape != (basis.n_funcs,):
        raise InvalidInputError("coefficient vector has wrong length")
    if which not in ("plain", "truncated"):
        raise InvalidInputError("which must be 'plain' or 'truncated'")
    if deriv is None:
        deriv = (0,) * mesh.dim
    elem = locate_element(mesh, s)
    out = 0.0
    for i in basis.element_funcs[elem]:
        c = coeffs[i]
        if c == 0.0:
            continue
        f = basis.funcs[i]
        if which == "plain":
            out += c * _eval_plain(mesh, f, s, deriv)
        else:
            out += c * _eval_truncated(mesh, basis, f, s, deriv)
    return out


def collocation_matrix(mesh: HierarchicalMesh, pts, deriv=None,
                       which: str = "plain", boundary_only: bool = False) -> np.ndarray:
    """Dense matrix of basis function values at arbitrary parameter points."""
    basis = hierarchical_basis(mesh)
    pts = np.atleast_2d(np.asarray(pts, float))
    if deriv is None:
        deriv = (0,) * mesh.dim
    cols = basis.boundary if boundary_only else range(basis.n_funcs)
    colmap = {c: k for k, c in enumerate(cols)}
    out = np.zeros((len(pts), len(colmap)))
    for r, s in enumerate(pts):
        elem = locate_element(mesh, s)
        for i in basis.element_funcs[elem]:
            k = colmap.get(int(i))
            if k is None:
                continue
            f = basis.funcs[i]
            if which == "plain":
                out[r, k] = _eval_plain(mesh, f, s, deriv)
            else:
                out[r, k] = _eval_truncated(mesh, basis, f, s, deriv)
    return out


# -- batched element-local evaluation ------------------------------------------

class ElementEvaluator:
    """Tensor-product evaluation of all basis functions alive on one element.

    Univariate value/derivative tables are cached per (function level,
    direction, interval), which is where almost all the assembly time goes.
    """

    def __init__(self, mesh: HierarchicalMesh, nders: int = 1):
        self.mesh = mesh
        self.basis = hierarchical_basis(mesh)
        self.nders = nders
        self._tables: dict = {}

    def _univariate(self, flevel: int, d: int, span: int, pts: np.ndarray):
        # keyed by the span so one-sided values at span boundaries come out
        # of the polynomial piece of the requested element
        key = (flevel, d, span, pts[0], pts[-1], len(pts))
        hit = self._tables.get(key)
        if hit is not None:
            return hit
        ln = self.mesh.lines(flevel)[d]
        win, lspan = ln.ders_window(span)
        tab = ders_basis_funs(win, ln.degree, lspan, pts, self.nders)
        hit = (span - ln.degree, tab)
        self._tables[key] = hit
        return hit

    def tables(self, elem: ActiveElement, pts_per_dir):
        """Values of the element's basis functions at the tensor grid of
        `pts_per_dir` (1D point arrays, C-order flattening, first direction
        slowest).

        Returns (positions, values) where values maps each derivative
        multi-index (orders summing to <= nders per direction) to an array of
        shape (n_funcs, n_points).
        """
        mesh, basis = self.mesh, self.basis
        d = mesh.dim
        positions = basis.element_funcs[elem]
        nf = len(positions)
        npts = int(np.prod([len(q) for q in pts_per_dir]))
        derivs = [dv for dv in product(range(self.nders + 1), repeat=d)
                  if sum(dv) <= self.nders]
        values = {dv: np.zeros((nf, npts)) for dv in derivs}
        if nf == 0:
            return positions, values
        flevels = basis.func_levels[positions]
        for lvl in sorted(set(flevels.tolist())):
            sel = np.nonzero(flevels == lvl)[0]
            shift = elem.level - lvl
            lines = mesh.lines(lvl)
            spans = [lines[dd].span(elem.cell[dd] >> shift)
                     for dd in range(d)]
            tabs = [self._univariate(lvl, dd, spans[dd],
                                     np.asarray(pts_per_dir[dd]))
                    for dd in range(d)]
            idx = basis.func_idx[positions[sel]]
            rows = idx - np.array([tabs[dd][0] for dd in range(d)])
            for dv in derivs:
                acc = None
                for dd in range(d):
                    part = tabs[dd][1][dv[dd], rows[:, dd], :]  # (nsel, m_dd)
                    acc = part if acc is None else acc[:, :, None] * part[:, None, :]
                    if acc.ndim == 3:
                        acc = acc.reshape(len(sel), -1)
                values[dv][sel] = acc
        return positions, values
