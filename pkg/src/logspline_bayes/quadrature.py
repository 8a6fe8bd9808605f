"""Composite Gauss-Legendre quadrature on piecewise-smooth integrands.

Panels are chosen to align with the integrand's breakpoints (spline knots,
density kinks), so every panel sees a smooth function and a fixed node
count per panel is enough.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

DEFAULT_NODES = 20


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(breakpoints, nodes_per_panel: int = DEFAULT_NODES):
    """Composite rule over consecutive panels of a sorted breakpoint array.

    Returns (nodes, weights) flattened across panels; zero-width panels are
    skipped.
    """
    bp = np.asarray(breakpoints, dtype=float)
    if bp.ndim != 1 or bp.size < 2:
        raise ValueError("breakpoints must be a 1-d array with >= 2 entries")
    if np.any(np.diff(bp) < 0):
        raise ValueError("breakpoints must be nondecreasing")
    x, w = gauss_legendre(nodes_per_panel)
    lo, hi = bp[:-1], bp[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate(fn, breakpoints, nodes_per_panel: int = DEFAULT_NODES) -> float:
    """Integrate a vectorized callable over [breakpoints[0], breakpoints[-1]]."""
    nodes, weights = panel_rule(breakpoints, nodes_per_panel)
    return float(np.dot(weights, fn(nodes)))


def merge_breakpoints(*arrays) -> np.ndarray:
    """Union of several breakpoint grids (sorted, deduplicated)."""
    merged = np.unique(np.concatenate([np.asarray(a, dtype=float) for a in arrays]))
    return merged
