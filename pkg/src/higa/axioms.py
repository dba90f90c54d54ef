"""Randomized structural checks of the mesh/basis machinery.

Each scenario builds a small hierarchical mesh through random admissible
refinements and then verifies the combinatorial guarantees the solver relies
on: admissibility is preserved, batch and element-by-element refinement
agree, refined elements split into 2^d children of equal parameter measure,
the overlay of two meshes satisfies the cardinality estimate, the number of
basis functions per element (and elements per support) is bounded, the
truncated basis forms a partition of unity, and the two-scale expansion
reproduces its function pointwise.

No PDE is solved here; everything is pure mesh and spline combinatorics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hiermesh import HierarchicalMesh, initial_mesh, overlay
from .hierbasis import eval_hier, hierarchical_basis
from .splines import (KnotVector, TensorBSplineIndex, TensorKnotVector,
                      eval_tensor, two_scale)

__all__ = ["AxiomReport", "run_axiom_checks"]

DEGREE_CHOICES = ((1, 1), (2, 2), (3, 3))


@dataclass
class AxiomReport:
    name: str
    scenarios: int
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def _random_knots0(rng, degrees) -> TensorKnotVector:
    kvs = []
    for p in degrees:
        if rng.random() < 0.5:
            interior = ()
        else:
            interior = (0.5,) * int(rng.integers(1, p + 1))
        kvs.append(KnotVector(p, (0.0,) * (p + 1) + interior + (1.0,) * (p + 1)))
    return TensorKnotVector(tuple(kvs))


def _random_mesh(rng, knots0, rounds):
    mesh = initial_mesh(knots0)
    marks = []
    for _ in range(rounds):
        active = mesh.active
        k = int(rng.integers(1, min(3, len(active)) + 1))
        chosen = [active[i] for i in rng.choice(len(active), size=k,
                                                replace=False)]
        marks.append(chosen)
        mesh = mesh.refine(chosen)
    return mesh, marks


def run_axiom_checks(trials: int = 200, seed: int = 20240801,
                     progress=None) -> list[AxiomReport]:
    rng = np.random.default_rng(seed)
    names = ["admissibility", "batch_vs_iterative", "bisection",
             "overlay_estimate", "bounded_number", "partition_of_unity",
             "boundary_trace", "two_scale_identity"]
    failures = {n: [] for n in names}
    for t in range(trials):
        degrees = DEGREE_CHOICES[t % len(DEGREE_CHOICES)]
        knots0 = _random_knots0(rng, degrees)
        rounds = int(rng.integers(2, 5))
        mesh, marks = _random_mesh(rng, knots0, rounds)

        if not mesh.is_admissible():
            failures["admissibility"].append((t, degrees))

        # batch refinement must equal marking the same elements one at a time
        it = initial_mesh(knots0)
        for chosen in marks:
            for elem in chosen:
                if elem in it.active_set:
                    it = it.refine([elem])
        if it != mesh:
            failures["batch_vs_iterative"].append((t, degrees))

        # one more refinement: every closed element is replaced by 2^d sons
        # of equal parameter measure
        active = mesh.active
        elem = active[int(rng.integers(len(active)))]
        fine = mesh.refine([elem])
        refined = [e for e in active if e not in fine.active_set]
        gained = [e for e in fine.active if e not in mesh.active_set]
        if len(gained) != (2 ** mesh.dim) * len(refined):
            failures["bisection"].append((t, degrees))
        else:
            for e in refined:
                lo, hi = mesh.element_box(e)
                kids = [g for g in gained if g.level == e.level + 1
                        and tuple(c // 2 for c in g.cell) == e.cell]
                vol = sum(float(np.prod(np.subtract(*reversed(fine.element_box(g)))))
                          for g in kids)
                if len(kids) != 2 ** mesh.dim or \
                        abs(vol - float(np.prod(hi - lo))) > 1e-12:
                    failures["bisection"].append((t, degrees))
                    break
        if not fine.is_admissible():
            failures["admissibility"].append((t, degrees, "post"))

        # overlay cardinality
        other, _ = _random_mesh(rng, knots0, int(rng.integers(1, 4)))
        ov = overlay(mesh, other)
        n0 = initial_mesh(knots0).n_elements
        if ov.n_elements > mesh.n_elements + other.n_elements - n0:
            failures["overlay_estimate"].append((t, degrees))

        # bounded numbers of functions per element / elements per support
        basis = hierarchical_basis(mesh)
        d = mesh.dim
        pp = int(np.prod([p + 1 for p in degrees]))
        for e, funcs in basis.element_funcs.items():
            if len(funcs) > 2 * pp:
                failures["bounded_number"].append((t, degrees, "per-element"))
                break
            levels = {basis.funcs[i].level for i in funcs}
            if not levels <= {e.level, e.level - 1}:
                failures["bounded_number"].append((t, degrees, "levels"))
                break
        for f in basis.funcs:
            if len(mesh._support_actives(f.level, f.idx)) > (2 ** d) * pp:
                failures["bounded_number"].append((t, degrees, "per-support"))
                break

        # truncated basis is a partition of unity; the plain one dominates it
        # pointwise, so its sum is >= 1 (they agree on unrefined meshes)
        ones = np.ones(basis.n_funcs)
        pts = rng.uniform(0.0, 1.0, size=(5, d))
        for s in pts:
            tr = eval_hier(mesh, ones, s, which="truncated")
            pl = eval_hier(mesh, ones, s, which="plain")
            if abs(tr - 1.0) > 1e-11 or pl < 1.0 - 1e-11:
                failures["partition_of_unity"].append((t, degrees, tuple(s)))
                break

        # functions flagged as vanishing on the box boundary do vanish there;
        # the full (nonnegative) plain basis still sums to >= 1 on the boundary
        bnd = np.zeros(basis.n_funcs)
        bnd[list(basis.boundary)] = 1.0
        for _ in range(3):
            s = rng.uniform(0.0, 1.0, size=d)
            face = int(rng.integers(d))
            s[face] = float(rng.integers(2))
            if abs(eval_hier(mesh, bnd, s, which="plain")) > 1e-12 or \
                    eval_hier(mesh, ones, s, which="plain") < 1.0 - 1e-11:
                failures["boundary_trace"].append((t, degrees, tuple(s)))
                break

        # two-scale identity for a random coarse function
        tkv = knots0
        j = tuple(int(rng.integers(kv.num_basis)) for kv in tkv.kvs)
        idx = TensorBSplineIndex(0, j)
        children = two_scale(tkv, idx)
        finekv = tkv.refined()
        for s in rng.uniform(0.0, 1.0, size=(3, d)):
            lhs = eval_tensor(tkv, idx, s)
            rhs = sum(c * eval_tensor(finekv, ci, s)
                      for ci, c in children.items())
            if abs(lhs - rhs) > 1e-11 or any(c < 0 for c in children.values()):
                failures["two_scale_identity"].append((t, degrees, tuple(s)))
                break

        if progress is not None:
            progress(t + 1, trials)
    return [AxiomReport(n, trials, failures[n]) for n in names]
