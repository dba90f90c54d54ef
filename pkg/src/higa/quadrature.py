"""Gauss-Legendre quadrature helpers."""

from __future__ import annotations

import functools

import numpy as np

__all__ = ["gauss_rule", "gauss_interval"]


@functools.lru_cache(maxsize=None)
def gauss_rule(n: int):
    """Nodes and weights of the n-point rule on [-1, 1] (exact to degree 2n-1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_interval(n: int, a: float, b: float):
    """The n-point Gauss rule mapped to [a, b]."""
    x, w = gauss_rule(n)
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w
