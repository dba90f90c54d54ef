"""Hierarchical meshes over dyadically refined tensor-product grids.

A mesh is described by the level-0 tensor knot vector plus, for every level
k >= 1, the set of level-k cells whose union is the refined subdomain of that
level.  Subdomains are nested; an element is active when its cell belongs to
its level's subdomain but none of its children belong to the next one.

Refinement first closes the marked set under "bad neighbors" (active elements
one level coarser that share the support of some hierarchical basis function
with a marked element) and then replaces every marked element by its 2^d
children.  On admissible input this produces an admissible mesh.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InvalidInputError
from .quadrature import gauss_interval
from .splines import KnotVector, TensorKnotVector, level_line

__all__ = [
    "ActiveElement",
    "HierarchicalMesh",
    "initial_mesh",
    "neighbors",
    "bad_neighbors",
    "is_admissible",
    "refine",
    "overlay",
    "patch",
    "element_size",
]


@dataclass(frozen=True, order=True)
class ActiveElement:
    """One active element: refinement level and per-direction cell indices."""

    level: int
    cell: tuple[int, ...]


def _children(cell):
    return product(*((2 * c, 2 * c + 1) for c in cell))


def _parent(cell):
    return tuple(c // 2 for c in cell)


class HierarchicalMesh:
    """Immutable hierarchical mesh.

    domains[k] holds the level-k cells composing the level-k subdomain;
    domains[0] always covers the whole parameter box.  Trailing empty levels
    are trimmed, so max_level equals the number of stored levels and active
    elements have levels 0 .. max_level-1.
    """

    def __init__(self, knots0: TensorKnotVector, domains, validate: bool = True):
        if knots0.level != 0:
            raise InvalidInputError("knots0 must be a level-0 knot vector")
        self.knots0 = knots0
        doms = [frozenset(d) for d in domains]
        while doms and not doms[-1]:
            doms.pop()
        if not doms:
            raise InvalidInputError("domains must at least contain level 0")
        self.domains = tuple(doms)
        if validate:
            self._validate()
        self._active = None
        self._active_set = None
        self._hash = None

    # -- basic structure -------------------------------------------------

    @property
    def dim(self) -> int:
        return self.knots0.dim

    @property
    def degrees(self) -> tuple[int, ...]:
        return self.knots0.degrees

    @property
    def max_level(self) -> int:
        """Smallest M with an empty level-M subdomain."""
        return len(self.domains)

    def lines(self, level: int):
        return tuple(level_line(kv, level) for kv in self.knots0.kvs)

    def num_cells(self, level: int) -> tuple[int, ...]:
        return tuple(ln.num_cells for ln in self.lines(level))

    def _validate(self):
        full = frozenset(product(*(range(n) for n in self.num_cells(0))))
        if self.domains[0] != full:
            raise InvalidInputError("level-0 subdomain must cover the whole box")
        for k in range(1, len(self.domains)):
            coarse = self.domains[k - 1]
            for cell in self.domains[k]:
                if _parent(cell) not in coarse:
                    raise InvalidInputError(
                        f"level-{k} subdomain is not nested in level {k - 1}")
            # each refined coarse cell must contribute all of its children
            for cell in self.domains[k]:
                for sib in _children(_parent(cell)):
                    if sib not in self.domains[k]:
                        raise InvalidInputError(
                            f"level-{k} subdomain is not a union of level-"
                            f"{k - 1} cells")

    @property
    def active(self) -> tuple[ActiveElement, ...]:
        if self._active is None:
            out = []
            for k, dom in enumerate(self.domains):
                nxt = self.domains[k + 1] if k + 1 < len(self.domains) else frozenset()
                for cell in dom:
                    if tuple(2 * c for c in cell) not in nxt:
                        out.append(ActiveElement(k, cell))
            out.sort()
            self._active = tuple(out)
            self._active_set = frozenset(out)
        return self._active

    @property
    def active_set(self) -> frozenset:
        self.active
        return self._active_set

    @property
    def n_elements(self) -> int:
        return len(self.active)

    def __eq__(self, other):
        return (isinstance(other, HierarchicalMesh)
                and self.knots0 == other.knots0
                and self.domains == other.domains)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.knots0, self.domains))
        return self._hash

    # -- geometry of cells -------------------------------------------------

    def element_box(self, elem: ActiveElement):
        lines = self.lines(elem.level)
        ivals = [ln.cell_interval(c) for ln, c in zip(lines, elem.cell)]
        lo = np.array([a for a, _ in ivals])
        hi = np.array([b for _, b in ivals])
        return lo, hi

    # -- basis-support combinatorics ----------------------------------------

    def func_in_basis(self, level: int, j: tuple[int, ...]) -> bool:
        """Whether tensor B-spline (level, j) belongs to the hierarchical basis."""
        lines = self.lines(level)
        ranges = [ln.func_support(ji) for ln, ji in zip(lines, j)]
        if level > 0:
            dom = self.domains[level]
            for cell in product(*(range(lo, hi) for lo, hi in ranges)):
                if cell not in dom:
                    return False
        if level + 1 >= len(self.domains):
            return True
        nxt = self.domains[level + 1]
        for cell in product(*(range(2 * lo, 2 * hi) for lo, hi in ranges)):
            if cell not in nxt:
                return True
        return False

    def _funcs_containing(self, level: int, cell: tuple[int, ...]):
        lines = self.lines(level)
        return product(*(ln.funcs_on_cell(c) for ln, c in zip(lines, cell)))

    def _actives_below(self, level: int, cell: tuple[int, ...], out: set):
        """Collect active descendants of a level-`level` cell inside its level's
        subdomain (the cell itself if active)."""
        nxt = self.domains[level + 1] if level + 1 < len(self.domains) else frozenset()
        child0 = tuple(2 * c for c in cell)
        if child0 not in nxt:
            out.add(ActiveElement(level, cell))
            return
        for ch in _children(cell):
            self._actives_below(level + 1, ch, out)

    def _support_actives(self, level: int, j: tuple[int, ...]) -> set:
        lines = self.lines(level)
        ranges = [ln.func_support(ji) for ln, ji in zip(lines, j)]
        out = set()
        for cell in product(*(range(lo, hi) for lo, hi in ranges)):
            if level == 0 or cell in self.domains[level]:
                self._actives_below(level, cell, out)
        return out

    def neighbors(self, elem: ActiveElement) -> set:
        """Active elements sharing the support of some hierarchical basis
        function with `elem` (includes `elem` itself)."""
        if elem not in self.active_set:
            raise InvalidInputError(f"{elem} is not active")
        out = set()
        for lvl in range(elem.level + 1):
            shift = elem.level - lvl
            acell = tuple(c >> shift for c in elem.cell)
            for j in self._funcs_containing(lvl, acell):
                if self.func_in_basis(lvl, j):
                    out |= self._support_actives(lvl, j)
        return out

    def bad_neighbors(self, elem: ActiveElement) -> set:
        """Neighbors exactly one level coarser than `elem`."""
        return {t for t in self.neighbors(elem) if t.level == elem.level - 1}

    def is_admissible(self) -> bool:
        """Neighbor levels differ by at most one for every active element."""
        for elem in self.active:
            for other in self.neighbors(elem):
                if abs(other.level - elem.level) > 1:
                    return False
        return True

    # -- refinement ----------------------------------------------------------

    def _bad_neighbors_closure(self, elem: ActiveElement, memo: dict) -> set:
        # On an admissible mesh every bad-neighbor pair is witnessed by a basis
        # function one level coarser than `elem`, so the search stays local.
        k = elem.level
        if k == 0:
            return set()
        lvl = k - 1
        acell = _parent(elem.cell)
        out = set()
        for j in self._funcs_containing(lvl, acell):
            key = (lvl, j)
            hit = memo.get(key)
            if hit is None:
                hit = set()
                if self.func_in_basis(lvl, j):
                    lines = self.lines(lvl)
                    ranges = [ln.func_support(ji) for ln, ji in zip(lines, j)]
                    nxt = (self.domains[lvl + 1]
                           if lvl + 1 < len(self.domains) else frozenset())
                    for cell in product(*(range(lo, hi) for lo, hi in ranges)):
                        if lvl > 0 and cell not in self.domains[lvl]:
                            continue
                        if tuple(2 * c for c in cell) not in nxt:
                            hit.add(ActiveElement(lvl, cell))
                memo[key] = hit
            out |= hit
        return out

    def refine(self, marked) -> "HierarchicalMesh":
        """Bisect the closure of `marked` into 2^d children per element.

        Precondition: the mesh is admissible and every marked element active.
        """
        marked = set(marked)
        for elem in marked:
            if elem not in self.active_set:
                raise InvalidInputError(f"marked element {elem} is not active")
        memo = {}
        closed = set(marked)
        frontier = marked
        rounds = 0
        while frontier:
            rounds += 1
            assert rounds <= self.max_level + 1, "closure failed to terminate"
            new = set()
            for elem in frontier:
                for nb in self._bad_neighbors_closure(elem, memo):
                    if nb not in closed:
                        new.add(nb)
            closed |= new
            frontier = new
        doms = [set(d) for d in self.domains]
        for elem in closed:
            while len(doms) <= elem.level + 1:
                doms.append(set())
            doms[elem.level + 1].update(_children(elem.cell))
        return HierarchicalMesh(self.knots0, doms, validate=False)

    # -- patches ---------------------------------------------------------

    def patch(self, region, k: int) -> set:
        """The k-fold neighborhood patch of a set of active elements.

        One round extends the region by every active element whose closure
        touches the closure of the current region (corner contact counts).
        """
        region = set(region)
        for elem in region:
            if elem not in self.active_set:
                raise InvalidInputError(f"{elem} is not active")
        if k < 0:
            raise InvalidInputError("k must be >= 0")
        boxes = {elem: self.element_box(elem) for elem in self.active}
        current = region
        for _ in range(k):
            grown = set(current)
            cur_boxes = [boxes[e] for e in current]
            for elem in self.active:
                if elem in grown:
                    continue
                lo, hi = boxes[elem]
                for clo, chi in cur_boxes:
                    if np.all(lo <= chi) and np.all(hi >= clo):
                        grown.add(elem)
                        break
            if grown == current:
                break
            current = grown
        return current

    # -- serialization -----------------------------------------------------

    def to_text(self) -> str:
        """Plain-text form; round trips bit-exactly (knots stored as hex floats)."""
        buf = io.StringIO()
        buf.write(f"dim {self.dim}\n")
        buf.write("degrees " + " ".join(str(p) for p in self.degrees) + "\n")
        for i, kv in enumerate(self.knots0.kvs):
            buf.write(f"knots{i} " + " ".join(t.hex() for t in kv.knots) + "\n")
        buf.write("cells\n")
        for k in range(1, len(self.domains)):
            for cell in sorted(self.domains[k]):
                buf.write(f"{k} " + " ".join(str(c) for c in cell) + "\n")
        return buf.getvalue()

    @staticmethod
    def from_text(text: str) -> "HierarchicalMesh":
        lines_ = [ln for ln in text.splitlines() if ln.strip()]
        try:
            dim = int(lines_[0].split()[1])
            degrees = [int(v) for v in lines_[1].split()[1:]]
            kvs = []
            for i in range(dim):
                vals = [float.fromhex(h) for h in lines_[2 + i].split()[1:]]
                kvs.append(KnotVector(degrees[i], tuple(vals)))
            if lines_[2 + dim].strip() != "cells":
                raise ValueError("missing cells section")
            knots0 = TensorKnotVector(tuple(kvs))
            full = frozenset(product(*(range(kv.num_cells) for kv in kvs)))
            doms = [set(full)]
            for ln in lines_[3 + dim:]:
                parts = ln.split()
                k = int(parts[0])
                cell = tuple(int(v) for v in parts[1:])
                if len(cell) != dim:
                    raise ValueError("cell dimension mismatch")
                while len(doms) <= k:
                    doms.append(set())
                doms[k].add(cell)
        except (IndexError, ValueError) as exc:
            raise InvalidInputError(f"malformed mesh text: {exc}") from exc
        return HierarchicalMesh(knots0, doms)


# -- module-level operation surface -------------------------------------------

def initial_mesh(knots0: TensorKnotVector) -> HierarchicalMesh:
    """The one-level mesh whose elements are the nonempty level-0 knot cells."""
    cells = product(*(range(kv.num_cells) for kv in knots0.kvs))
    return HierarchicalMesh(knots0, [set(cells)], validate=False)


def neighbors(mesh: HierarchicalMesh, elem: ActiveElement) -> set:
    return mesh.neighbors(elem)


def bad_neighbors(mesh: HierarchicalMesh, elem: ActiveElement) -> set:
    return mesh.bad_neighbors(elem)


def is_admissible(mesh: HierarchicalMesh) -> bool:
    return mesh.is_admissible()


def refine(mesh: HierarchicalMesh, marked) -> HierarchicalMesh:
    return mesh.refine(marked)


def overlay(a: HierarchicalMesh, b: HierarchicalMesh) -> HierarchicalMesh:
    """Coarsest common refinement: per-level union of the subdomains."""
    if a.knots0 != b.knots0:
        raise InvalidInputError("meshes must share the level-0 knot vector")
    n = max(len(a.domains), len(b.domains))
    doms = []
    for k in range(n):
        da = a.domains[k] if k < len(a.domains) else frozenset()
        db = b.domains[k] if k < len(b.domains) else frozenset()
        doms.append(da | db)
    return HierarchicalMesh(a.knots0, doms, validate=False)


def patch(mesh: HierarchicalMesh, region, k: int) -> set:
    return mesh.patch(region, k)


def element_size(mesh: HierarchicalMesh, geometry, elem: ActiveElement) -> float:
    """Physical measure of an element under the geometry map."""
    if elem not in mesh.active_set:
        raise InvalidInputError(f"{elem} is not active")
    lo, hi = mesh.element_box(elem)
    rules = [gauss_interval(p + 1, a, b)
             for p, a, b in zip(geometry.degrees, lo, hi)]
    pts = np.array(list(product(*(r[0] for r in rules))))
    wts = np.prod(np.array(list(product(*(r[1] for r in rules)))), axis=1)
    jac = geometry.jacobian_points(pts)
    det = np.linalg.det(jac)
    return float(np.dot(np.abs(det), wts))
