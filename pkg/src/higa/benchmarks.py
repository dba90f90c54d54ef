"""Benchmark problems: unit square, L-shape, quarter ring.

Each benchmark bundles the PDE data, the geometry map, the initial ansatz
knot vectors for a requested degree and the default marking parameter.  The
square problem has a closed-form solution (so energy errors are available);
the other two are driven by the estimator alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .assembly import PDEProblem
from .errors import ConfigError
from .geometry import GeometryMap, benchmark_geometry
from .splines import KnotVector, TensorKnotVector

__all__ = ["Benchmark", "problem_library", "write_history_csv"]

PROBLEM_NAMES = ("square", "lshape", "quarter_ring")


@dataclass
class Benchmark:
    name: str
    problem: PDEProblem
    geometry: GeometryMap
    knots0: TensorKnotVector
    default_theta: float
    exact_solution: Optional[Callable] = None
    exact_gradient: Optional[Callable] = None


def _square_u(x, s):
    X, Y = x[:, 0], x[:, 1]
    return X ** 2.3 * (1 - X) * Y ** 2.9 * (1 - Y)


def _square_grad(x, s):
    X, Y = x[:, 0], x[:, 1]
    gx = X ** 2.3 * (1 - X)
    gy = Y ** 2.9 * (1 - Y)
    dgx = 2.3 * X ** 1.3 - 3.3 * X ** 2.3
    dgy = 2.9 * Y ** 1.9 - 3.9 * Y ** 2.9
    return np.stack([dgx * gy, gx * dgy], axis=-1)


def _square_f(x, s):
    X, Y = x[:, 0], x[:, 1]
    gx = X ** 2.3 * (1 - X)
    gy = Y ** 2.9 * (1 - Y)
    d2gx = 2.3 * 1.3 * X ** 0.3 - 3.3 * 2.3 * X ** 1.3
    d2gy = 2.9 * 1.9 * Y ** 0.9 - 3.9 * 2.9 * Y ** 1.9
    return -(d2gx * gy + gx * d2gy)


def _quarter_ring_f(x, s):
    # characteristic function of the image of [1/2, 1] x [0, 1/2]; evaluated
    # in parameter coordinates so the discontinuity lies exactly on knot lines
    return np.where((s[:, 0] >= 0.5) & (s[:, 1] <= 0.5), 1.0, 0.0)


def _open_knots(p: int, interior=()) -> KnotVector:
    return KnotVector(p, (0.0,) * (p + 1) + tuple(interior) + (1.0,) * (p + 1))


def initial_knots(name: str, degree: int) -> TensorKnotVector:
    """Initial ansatz knot vectors; interior knots of the geometry are
    repeated to degree-many so the ansatz is only C^0 across geometry knot
    lines (where the benchmark data has kinks)."""
    p = degree
    if name == "square":
        return TensorKnotVector((_open_knots(p), _open_knots(p)))
    if name == "lshape":
        kv1 = _open_knots(p, (0.5,) * p)
        return TensorKnotVector((kv1, _open_knots(p)))
    if name == "quarter_ring":
        kv = _open_knots(p, (0.5,) * p)
        return TensorKnotVector((kv, kv))
    raise ConfigError(f"unknown problem {name!r}")


def problem_library(name: str, degree: int) -> Benchmark:
    if name not in PROBLEM_NAMES:
        raise ConfigError(f"unknown problem {name!r}; pick one of {PROBLEM_NAMES}")
    if degree < 1:
        raise ConfigError("degree must be >= 1")
    geometry = benchmark_geometry(name)
    knots0 = initial_knots(name, degree)
    # the ansatz must be refinable from the geometry: every geometry knot
    # line has to appear among the ansatz knot lines
    for kva, kvg in zip(knots0.kvs, geometry.kvs):
        missing = set(kvg.breakpoints) - set(kva.breakpoints)
        if missing:
            raise ConfigError(f"ansatz knots miss geometry knots {missing}")
    if name == "square":
        return Benchmark(name, PDEProblem.poisson(_square_f), geometry,
                         knots0, 0.5, _square_u, _square_grad)
    if name == "lshape":
        f = lambda x, s: np.ones(len(x))
        return Benchmark(name, PDEProblem.poisson(f), geometry, knots0, 0.4)
    return Benchmark(name, PDEProblem.poisson(_quarter_ring_f), geometry,
                     knots0, 0.8)


def write_history_csv(history, path):
    """Convergence history CSV; energy_error is empty when unavailable."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "n_elements", "n_dofs", "max_level",
                    "estimator", "energy_error"])
        for st in history:
            err = "" if st.energy_error is None else repr(st.energy_error)
            w.writerow([st.step, st.n_elements, st.n_dofs, st.max_level,
                        repr(st.eta), err])
