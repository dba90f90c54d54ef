"""Residual a posteriori error estimator.

Per element T the indicator is

    eta(T)^2 = |T|^(2/d) || f + div(A grad U) - b.grad U - c U ||_{L2(T)}^2
             + |T|^(1/d) || [A grad U . n] ||_{L2(dT cap Omega)}^2

with |T| the physical element measure.  Interior facets are the maximal
axis-aligned segments over which the pair of adjacent active elements is
constant (so hanging interfaces split along the finer side); every facet
contributes to both of its elements, each weighted with that element's size.

Second derivatives of U in physical coordinates come from the exact chain
rule through the geometry map, not from differencing.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .assembly import PDEProblem, _element_chunks, element_quadrature
from .errors import ConfigError, InvalidInputError
from .hiermesh import ActiveElement, HierarchicalMesh
from .hierbasis import ElementEvaluator, hierarchical_basis
from .quadrature import gauss_interval

__all__ = ["Facet", "ElementIndicators", "facets", "estimate",
           "dump_indicators"]


@dataclass(frozen=True)
class Facet:
    """Interior mesh facet with constant adjacent elements.

    axis is the normal direction; the facet spans [lo, hi] in the other
    direction at the given coordinate.  minus/plus are the active elements on
    the smaller/larger coordinate side.
    """

    axis: int
    coord: float
    lo: float
    hi: float
    minus: ActiveElement
    plus: ActiveElement


@dataclass
class ElementIndicators:
    elements: tuple
    volume_sq: np.ndarray
    jump_sq: np.ndarray

    @property
    def eta_sq(self) -> np.ndarray:
        return self.volume_sq + self.jump_sq

    @property
    def total(self) -> float:
        return float(np.sum(self.eta_sq))

    @property
    def eta(self) -> float:
        return float(np.sqrt(self.total))


def facets(mesh: HierarchicalMesh) -> list[Facet]:
    """All interior facets of a two-dimensional hierarchical mesh."""
    if mesh.dim != 2:
        raise InvalidInputError("facet decomposition implemented for d = 2")
    out = []
    for axis in (0, 1):
        tang = 1 - axis
        minus_edges: dict[float, list] = {}
        plus_edges: dict[float, list] = {}
        for elem in mesh.active:
            lo, hi = mesh.element_box(elem)
            if hi[axis] != 1.0:
                minus_edges.setdefault(hi[axis], []).append(
                    (lo[tang], hi[tang], elem))
            if lo[axis] != 0.0:
                plus_edges.setdefault(lo[axis], []).append(
                    (lo[tang], hi[tang], elem))
        for coord in sorted(minus_edges):
            mins = sorted(minus_edges[coord])
            plus = sorted(plus_edges[coord])
            cuts = sorted({v for a, b, _ in mins + plus for v in (a, b)})
            mstart = [a for a, _, _ in mins]
            pstart = [a for a, _, _ in plus]
            segs = []
            for a, b in zip(cuts, cuts[1:]):
                em = mins[bisect_right(mstart, a) - 1][2]
                ep = plus[bisect_right(pstart, a) - 1][2]
                if segs and segs[-1][2] is em and segs[-1][3] is ep \
                        and segs[-1][1] == a:
                    segs[-1] = (segs[-1][0], b, em, ep)
                else:
                    segs.append((a, b, em, ep))
            for a, b, em, ep in segs:
                out.append(Facet(axis, float(coord), float(a), float(b), em, ep))
    return out


def estimate(mesh: HierarchicalMesh, geometry, problem: PDEProblem,
             coeffs) -> ElementIndicators:
    """Element indicators for the discrete solution given by `coeffs` (over
    the boundary-vanishing basis, hierarchical order)."""
    basis = hierarchical_basis(mesh)
    coeffs = np.asarray(coeffs, float)
    if coeffs.shape != (basis.n_dofs,):
        raise ConfigError("coefficients must match the boundary basis")
    full = np.zeros(basis.n_funcs)
    full[list(basis.boundary)] = coeffs
    ev = ElementEvaluator(mesh, nders=2)
    d = mesh.dim
    orders = tuple(p + 2 for p in mesh.degrees)
    grads = [tuple(1 if i == a else 0 for i in range(d)) for a in range(d)]
    hess = [[tuple((1 if i == a else 0) + (1 if i == b else 0)
                   for i in range(d)) for b in range(d)] for a in range(d)]
    elements = mesh.active
    index = {e: k for k, e in enumerate(elements)}
    volume_sq = np.zeros(len(elements))
    jump_raw = np.zeros(len(elements))
    sizes = np.zeros(len(elements))
    nq = int(np.prod(orders))

    for chunk in _element_chunks(elements):
        quads = [element_quadrature(mesh, e, orders) for e in chunk]
        big = np.concatenate([g for _, g, _ in quads])
        jac = np.asarray(geometry.jacobian_points(big))
        det = np.linalg.det(jac)
        inv = np.linalg.inv(jac)
        hgeo = geometry.second_derivatives_points(big)
        x = geometry.map_points(big)
        Amat = np.asarray(problem.A(x, big), float)
        bvec = np.asarray(problem.b(x, big), float)
        cco = np.asarray(problem.c(x, big), float)
        fco = np.asarray(problem.f(x, big), float)
        dAv = None if problem.dA is None \
            else np.asarray(problem.dA(x, big), float)
        for k, (elem, (pts_per_dir, _, wts)) in enumerate(zip(chunk, quads)):
            sl = slice(k * nq, (k + 1) * nq)
            pos, tabs = ev.tables(elem, pts_per_dir)
            ce = full[pos]
            gpar = np.stack([ce @ tabs[g] for g in grads], axis=-1)
            gphys = np.einsum("qab,qa->qb", inv[sl], gpar)
            hpar = np.empty((nq, d, d))
            for a in range(d):
                for b in range(a, d):
                    hpar[:, a, b] = hpar[:, b, a] = ce @ tabs[hess[a][b]]
            m = hpar - np.einsum("qm,qmab->qab", gphys, hgeo[sl])
            hphys = np.einsum("qai,qbj,qab->qij", inv[sl], inv[sl], m)
            div_agrad = np.einsum("qij,qij->q", Amat[sl], hphys)
            if dAv is not None:
                div_agrad = div_agrad + np.einsum("qiij,qj->q", dAv[sl], gphys)
            resid = fco[sl] + div_agrad \
                - np.einsum("qa,qa->q", bvec[sl], gphys) \
                - cco[sl] * (ce @ tabs[(0,) * d])
            w = wts * det[sl]
            sizes[index[elem]] = float(np.dot(det[sl], wts))
            volume_sq[index[elem]] = float(np.dot(resid * resid, w))

    all_facets = facets(mesh)
    for axis in (0, 1):
        batch = [f for f in all_facets if f.axis == axis]
        if not batch:
            continue
        tang = 1 - axis
        nqf = mesh.degrees[tang] + 2
        rules = [gauss_interval(nqf, f.lo, f.hi) for f in batch]
        big = np.empty((len(batch) * nqf, 2))
        for k, (xs, _) in enumerate(rules):
            big[k * nqf : (k + 1) * nqf, axis] = batch[k].coord
            big[k * nqf : (k + 1) * nqf, tang] = xs
        # the geometry map may be merely continuous across the facet line, so
        # each side gets its own one-sided Jacobian
        jac_side = {0: np.asarray(geometry.jacobian_points(big, left_axes=(axis,))),
                    1: np.asarray(geometry.jacobian_points(big))}
        x = geometry.map_points(big)
        Amat = np.asarray(problem.A(x, big), float)
        for k, (f, (xs, ws)) in enumerate(zip(batch, rules)):
            sl = slice(k * nqf, (k + 1) * nqf)
            pts = [None, None]
            pts[axis] = np.array([f.coord])
            pts[tang] = xs
            flux = []
            for side, elem in enumerate((f.minus, f.plus)):
                inv = np.linalg.inv(jac_side[side][sl])
                pos, tabs = ev.tables(elem, pts)
                ce = full[pos]
                gpar = np.stack([ce @ tabs[g] for g in grads], axis=-1)
                gphys = np.einsum("qab,qa->qb", inv, gpar)
                flux.append(np.einsum("qab,qb->qa", Amat[sl], gphys))
            tau = jac_side[0][sl, :, tang]         # physical facet tangent
            tlen = np.linalg.norm(tau, axis=1)
            normal = np.stack([tau[:, 1], -tau[:, 0]], axis=-1) / tlen[:, None]
            q = np.einsum("qa,qa->q", flux[0] - flux[1], normal)
            val = float(np.dot(q * q, ws * tlen))
            jump_raw[index[f.minus]] += val
            jump_raw[index[f.plus]] += val

    volume = sizes ** (2.0 / d) * volume_sq
    jump = sizes ** (1.0 / d) * jump_raw
    return ElementIndicators(elements=elements, volume_sq=volume, jump_sq=jump)


def dump_indicators(ind: ElementIndicators, path: str):
    """One line per element: level, cell indices, weighted volume and jump
    squared terms."""
    with open(path, "w") as fh:
        for elem, v, j in zip(ind.elements, ind.volume_sq, ind.jump_sq):
            cell = " ".join(str(c) for c in elem.cell)
            fh.write(f"{elem.level} {cell} {float(v)!r} {float(j)!r}\n")
