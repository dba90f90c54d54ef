"""Scott-Zhang type quasi-interpolation onto the hierarchical space.

For each basis function beta of level k the dual functional beta* is a linear
combination of the level-k tensor B-splines alive on one chosen active
element T_beta (the lexicographically smallest active level-k element inside
supp beta); its coefficients solve the local Gram system so that
<beta*, beta'> = delta_{beta beta'} for all level-k functions alive on
T_beta.  The projector sends v to

    J v = sum_beta <beta*, v> Trunc(beta)

over the boundary-vanishing basis functions; it reproduces every member of
the discrete space and is locally L2-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InvalidInputError
from .hiermesh import ActiveElement, HierarchicalMesh
from .hierbasis import HierBasisFunction, hierarchical_basis
from .quadrature import gauss_interval
from .splines import ders_basis_funs

__all__ = ["DualFunctional", "build_dual", "apply_dual", "project"]


@dataclass
class DualFunctional:
    """Element-local dual of one hierarchical basis function."""

    beta: HierBasisFunction
    element: ActiveElement
    funcs: tuple            # level-k per-direction index tuples alive on T_beta
    coeffs: np.ndarray      # same order as funcs


def _local_quadrature(mesh, elem, extra=2):
    lo, hi = mesh.element_box(elem)
    rules = [gauss_interval(p + extra, a, b)
             for p, a, b in zip(mesh.degrees, lo, hi)]
    grid = np.array(list(product(*(r[0] for r in rules))))
    wts = np.prod(np.array(list(product(*(r[1] for r in rules)))), axis=1)
    return [r[0] for r in rules], grid, wts


def _level_tables(mesh, level, elem, pts_per_dir):
    """Values at the tensor points of the level-`level` univariate functions
    alive on the element, per direction: (first_index, (p+1, m) array)."""
    lines = mesh.lines(level)
    shift = elem.level - level
    out = []
    for d, ln in enumerate(lines):
        span = ln.span(elem.cell[d] >> shift)
        win, lspan = ln.ders_window(span)
        tab = ders_basis_funs(win, ln.degree, lspan,
                              np.asarray(pts_per_dir[d]), 0)[0]
        out.append((span - ln.degree, tab))
    return out


def build_dual(mesh: HierarchicalMesh, beta: HierBasisFunction) -> DualFunctional:
    """Construct the dual functional of a hierarchical basis function."""
    basis = hierarchical_basis(mesh)
    if (beta.level, beta.idx) not in basis.pos:
        raise InvalidInputError("function is not in the hierarchical basis")
    candidates = sorted(e.cell for e in mesh._support_actives(beta.level, beta.idx)
                        if e.level == beta.level)
    if not candidates:
        raise InvalidInputError("no active element of the function's level "
                                "inside its support")
    elem = ActiveElement(beta.level, candidates[0])
    pts_per_dir, grid, wts = _local_quadrature(mesh, elem)
    tabs = _level_tables(mesh, beta.level, elem, pts_per_dir)
    funcs = list(product(*(range(first, first + tab.shape[0])
                           for first, tab in tabs)))
    vals = np.empty((len(funcs), len(grid)))
    for r, j in enumerate(funcs):
        acc = None
        for d, (first, tab) in enumerate(tabs):
            row = tab[j[d] - first]
            acc = row if acc is None else np.multiply.outer(acc, row).ravel()
        vals[r] = acc
    gram = vals @ (vals * wts).T
    rhs = np.zeros(len(funcs))
    rhs[funcs.index(beta.idx)] = 1.0
    coeffs = np.linalg.solve(gram, rhs)
    return DualFunctional(beta, elem, tuple(funcs), coeffs)


def apply_dual(mesh: HierarchicalMesh, dual: DualFunctional, v) -> float:
    """<beta*, v> where v maps parameter points (n, d) to values (n,)."""
    pts_per_dir, grid, wts = _local_quadrature(mesh, dual.element)
    tabs = _level_tables(mesh, dual.beta.level, dual.element, pts_per_dir)
    dual_vals = np.zeros(len(grid))
    for c, j in zip(dual.coeffs, dual.funcs):
        acc = None
        for d, (first, tab) in enumerate(tabs):
            row = tab[j[d] - first]
            acc = row if acc is None else np.multiply.outer(acc, row).ravel()
        dual_vals += c * acc
    return float(np.dot(dual_vals * wts, np.asarray(v(grid), float)))


def project(mesh: HierarchicalMesh, v) -> np.ndarray:
    """Coefficients of J v over the boundary-vanishing basis (to be evaluated
    in the truncated sense)."""
    basis = hierarchical_basis(mesh)
    out = np.empty(basis.n_dofs)
    for k, i in enumerate(basis.boundary):
        dual = build_dual(mesh, basis.funcs[i])
        out[k] = apply_dual(mesh, dual, v)
    return out
