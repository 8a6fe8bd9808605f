"""Clamped B-spline bases on uniform partitions of [0, 1].

A basis of order ``q`` (piecewise polynomial degree ``q - 1``) on ``K``
uniform intervals has dimension ``J = q + K - 1``, forms a partition of
unity, and each member is supported on at most ``q`` consecutive knot
intervals (length <= q/K).
"""
from __future__ import annotations

import numpy as np

from .quadrature import DEFAULT_NODES, panel_rule


class SplineBasis:
    """Clamped B-spline basis of order q on K uniform intervals of [0, 1].

    The knot vector is ``[0]*q + [1/K, ..., (K-1)/K] + [1]*q``. Evaluation
    uses the standard triangular (Cox-de Boor) recursion; the right endpoint
    x = 1 is mapped into the last interval so values there are left limits.

    Instances are immutable; quadrature grids and design matrices built from
    them are cached on first use, so sharing one basis across threads is safe
    after the first evaluation.
    """

    def __init__(self, order: int, intervals: int):
        if order < 1:
            raise ValueError(f"spline order must be >= 1, got {order}")
        if intervals < 1:
            raise ValueError(f"interval count must be >= 1, got {intervals}")
        self.order = int(order)
        self.intervals = int(intervals)
        self.dimension = self.order + self.intervals - 1
        interior = np.arange(1, self.intervals) / self.intervals
        self.knots = np.concatenate(
            [np.zeros(self.order), interior, np.ones(self.order)]
        )
        self.knots.setflags(write=False)
        # breakpoints of the piecewise-polynomial pieces
        self.breakpoints = np.arange(self.intervals + 1) / self.intervals
        self.breakpoints.setflags(write=False)
        self._quad_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def __repr__(self) -> str:
        return f"SplineBasis(order={self.order}, intervals={self.intervals})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SplineBasis)
            and self.order == other.order
            and self.intervals == other.intervals
        )

    def __hash__(self) -> int:
        return hash((self.order, self.intervals))

    def support(self, j: int) -> tuple[float, float]:
        """Knot interval [t_j, t_{j+q}] outside which basis function j vanishes."""
        if not 0 <= j < self.dimension:
            raise ValueError(f"basis index {j} out of range 0..{self.dimension - 1}")
        return float(self.knots[j]), float(self.knots[j + self.order])

    def design_matrix(self, x) -> np.ndarray:
        """Evaluate all J basis functions at the points x.

        Returns an array of shape (len(x), J); rows sum to 1 and have at
        most q nonzero entries.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.ndim != 1:
            raise ValueError("x must be scalar or 1-d")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("evaluation points must lie in [0, 1]")
        q, J, t = self.order, self.dimension, self.knots
        p = q - 1
        # span index i with t[i] <= x < t[i+1]; x = 1 falls in the last span
        span = np.searchsorted(t, x, side="right") - 1
        span = np.clip(span, p, J - 1)
        m = x.size
        vals = np.zeros((q, m))
        vals[0] = 1.0
        left = np.empty((q, m))
        right = np.empty((q, m))
        for j in range(1, q):
            left[j] = x - t[span + 1 - j]
            right[j] = t[span + j] - x
            saved = np.zeros(m)
            for r in range(j):
                denom = right[r + 1] + left[j - r]
                temp = vals[r] / denom
                vals[r] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            vals[j] = saved
        out = np.zeros((m, J))
        rows = np.arange(m)
        for r in range(q):
            out[rows, span - p + r] = vals[r]
        return out

    def quadrature(self, nodes_per_interval: int = DEFAULT_NODES):
        """Composite Gauss-Legendre grid aligned with the knot intervals.

        Returns (nodes, weights, design) where design has shape
        (len(nodes), J). Cached per node count.
        """
        cached = self._quad_cache.get(nodes_per_interval)
        if cached is None:
            nodes, weights = panel_rule(self.breakpoints, nodes_per_interval)
            design = self.design_matrix(nodes)
            for a in (nodes, weights, design):
                a.setflags(write=False)
            cached = (nodes, weights, design)
            self._quad_cache[nodes_per_interval] = cached
        return cached


def build_basis(q: int, K: int) -> SplineBasis:
    """Construct the clamped order-q B-spline basis on K uniform intervals."""
    return SplineBasis(q, K)


def eval_basis(basis: SplineBasis, x: float) -> np.ndarray:
    """Evaluate (B_1(x), ..., B_J(x)) at a single point x in [0, 1]."""
    return basis.design_matrix(float(x))[0]
