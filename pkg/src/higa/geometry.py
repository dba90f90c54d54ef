"""NURBS geometry maps from the parameter box to the physical domain.

All integrals in the package are pulled back to the parameter domain, so only
the map, its Jacobian and its second derivatives are ever needed; the inverse
map is never evaluated.  Derivatives of the rational map come from the
quotient rule applied to the weighted numerator and the weight function.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ConfigError, InvalidInputError
from .splines import KnotVector, basis_matrix

__all__ = ["GeometryMap", "benchmark_geometry", "save_geometry", "load_geometry"]


class GeometryMap:
    """Tensor-product NURBS map.

    ctrl has shape (N_1, ..., N_d, d) and weights shape (N_1, ..., N_d);
    all weights must be positive.
    """

    def __init__(self, kvs, ctrl, weights):
        self.kvs = tuple(kvs)
        self.ctrl = np.asarray(ctrl, float)
        self.weights = np.asarray(weights, float)
        d = len(self.kvs)
        shape = tuple(kv.num_basis for kv in self.kvs)
        if self.ctrl.shape != shape + (d,):
            raise ConfigError(
                f"control net must have shape {shape + (d,)}, got {self.ctrl.shape}")
        if self.weights.shape != shape:
            raise ConfigError(
                f"weights must have shape {shape}, got {self.weights.shape}")
        if np.any(self.weights <= 0.0):
            raise ConfigError("all weights must be positive")

    @property
    def dim(self) -> int:
        return len(self.kvs)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(kv.degree for kv in self.kvs)

    def _tensors(self, pts, nders, left_axes=()):
        pts = np.atleast_2d(np.asarray(pts, float))
        n, d = pts.shape
        if d != self.dim:
            raise InvalidInputError("point dimension mismatch")
        mats = [basis_matrix(self.kvs[i], pts[:, i], nders,
                             side="left" if i in left_axes else "right")
                for i in range(d)]
        wc = self.ctrl * self.weights[..., None]

        def contract(tensor, orders):
            # tensor indexed (j_1 .. j_d, extra); contract each j with the
            # per-direction basis values at the shared point index q
            cur = tensor
            for i, r in enumerate(orders):
                b = mats[i][r]  # (N_i, n)
                if i == 0:
                    cur = np.einsum("jq,j...->q...", b, cur)
                else:
                    cur = np.einsum("jq,qj...->q...", b, cur)
            return cur

        return pts, contract, wc

    def map_points(self, pts) -> np.ndarray:
        """Physical coordinates, shape (n, d)."""
        pts, contract, wc = self._tensors(pts, 0)
        zero = (0,) * self.dim
        den = contract(self.weights, zero)
        num = contract(wc, zero)
        return num / den[:, None]

    def jacobian_points(self, pts, left_axes=()) -> np.ndarray:
        """Jacobian [q, i, a] = d gamma_i / d s_a, shape (n, d, d).

        Derivatives are one-sided: at an interior breakpoint the span on the
        larger-coordinate side is used, unless the direction appears in
        left_axes, in which case the left limit is taken (needed where the
        map itself is merely continuous).
        """
        pts, contract, wc = self._tensors(pts, 1, left_axes)
        d = self.dim
        zero = (0,) * d
        den = contract(self.weights, zero)
        gamma = contract(wc, zero) / den[:, None]
        jac = np.empty((len(pts), d, d))
        for a in range(d):
            da = tuple(1 if i == a else 0 for i in range(d))
            jac[:, :, a] = (contract(wc, da) - gamma * contract(self.weights, da)[:, None]) / den[:, None]
        return jac

    def second_derivatives_points(self, pts) -> np.ndarray:
        """Second derivatives [q, i, a, b] = d^2 gamma_i / d s_a d s_b."""
        pts, contract, wc = self._tensors(pts, 2)
        d = self.dim
        zero = (0,) * d
        den = contract(self.weights, zero)
        gamma = contract(wc, zero) / den[:, None]
        first = np.empty((len(pts), d, d))
        dden = np.empty((len(pts), d))
        for a in range(d):
            da = tuple(1 if i == a else 0 for i in range(d))
            dden[:, a] = contract(self.weights, da)
            first[:, :, a] = (contract(wc, da) - gamma * dden[:, a, None]) / den[:, None]
        out = np.empty((len(pts), d, d, d))
        for a in range(d):
            for b in range(a, d):
                dab = tuple((1 if i == a else 0) + (1 if i == b else 0)
                            for i in range(d))
                num_ab = contract(wc, dab)
                den_ab = contract(self.weights, dab)
                val = (num_ab
                       - first[:, :, a] * dden[:, b, None]
                       - first[:, :, b] * dden[:, a, None]
                       - gamma * den_ab[:, None]) / den[:, None]
                out[:, :, a, b] = val
                out[:, :, b, a] = val
        return out

    # single-point conveniences
    def map(self, s):
        return self.map_points(np.asarray(s, float)[None, :])[0]

    def jacobian(self, s):
        return self.jacobian_points(np.asarray(s, float)[None, :])[0]

    def second_derivatives(self, s):
        return self.second_derivatives_points(np.asarray(s, float)[None, :])[0]


def benchmark_geometry(name: str) -> GeometryMap:
    """The three benchmark domains: unit square, L-shape, quarter ring."""
    corner_ctrl = np.empty((3, 2, 2))
    corner_ctrl[:, 0] = [(0.0, 0.5), (0.5, 0.5), (0.5, 0.0)]
    corner_ctrl[:, 1] = [(0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]
    if name == "square":
        kv = KnotVector(1, (0.0, 0.0, 1.0, 1.0))
        ctrl = np.empty((2, 2, 2))
        ctrl[:, 0] = [(0.0, 0.0), (1.0, 0.0)]
        ctrl[:, 1] = [(0.0, 1.0), (1.0, 1.0)]
        return GeometryMap((kv, kv), ctrl, np.ones((2, 2)))
    if name == "lshape":
        kv1 = KnotVector(1, (0.0, 0.0, 0.5, 1.0, 1.0))
        kv2 = KnotVector(1, (0.0, 0.0, 1.0, 1.0))
        return GeometryMap((kv1, kv2), corner_ctrl, np.ones((3, 2)))
    if name == "quarter_ring":
        kv1 = KnotVector(2, (0.0, 0.0, 0.0, 1.0, 1.0, 1.0))
        kv2 = KnotVector(1, (0.0, 0.0, 1.0, 1.0))
        w = np.ones((3, 2))
        w[1, :] = 1.0 / math.sqrt(2.0)
        return GeometryMap((kv1, kv2), corner_ctrl, w)
    raise ConfigError(f"unknown benchmark geometry {name!r}")


def save_geometry(geom: GeometryMap, path: str):
    data = {
        "degrees": list(geom.degrees),
        "knots": [list(kv.knots) for kv in geom.kvs],
        "control_points": geom.ctrl.tolist(),
        "weights": geom.weights.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)


def load_geometry(path: str) -> GeometryMap:
    try:
        with open(path) as fh:
            data = json.load(fh)
        kvs = tuple(KnotVector(p, tuple(k))
                    for p, k in zip(data["degrees"], data["knots"]))
        return GeometryMap(kvs, np.array(data["control_points"], float),
                           np.array(data["weights"], float))
    except (KeyError, ValueError, InvalidInputError) as exc:
        raise ConfigError(f"bad geometry file {path}: {exc}") from exc
