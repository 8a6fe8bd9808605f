"""Densities on [0, 1], centered on the log-spline exponential family.

The family is f_theta(x) = exp(sum_j theta_j B_j(x) - c(theta)) with a
sum-zero coefficient vector. c(theta) and its gradient (the mean map
E[B_j]) are computed by composite Gauss-Legendre quadrature aligned with
the knot intervals, with a max-shift guard inside the exponential.

Also provides piecewise-constant, analytic (quadrature-normalized) and
mixture densities, all sharing one panel-aware base class so that
quadrature, distances and inverse-CDF sampling work uniformly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import DEFAULT_NODES, gauss_legendre, merge_breakpoints, panel_rule
from .splines import SplineBasis

SUM_ZERO_TOL = 1e-12
BOX_TOL = 1e-9
_SAMPLE_TOL = 1e-12


@dataclass(frozen=True)
class Theta:
    """Sum-zero spline coefficient vector, optionally box-constrained.

    ``values`` must sum to zero within 1e-12. When ``box_bound`` is finite
    the sup-norm must not exceed it (boundary points from clipping are
    accepted within a small slack).
    """

    values: np.ndarray
    box_bound: float = np.inf

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("theta must be a 1-d vector of length >= 2")
        if abs(v.sum()) > SUM_ZERO_TOL * max(1.0, np.abs(v).max()):
            raise ValueError(f"theta must sum to zero, got sum {v.sum():.3g}")
        if np.isfinite(self.box_bound):
            if self.box_bound < 0:
                raise ValueError("box bound must be nonnegative")
            if np.abs(v).max() > self.box_bound + BOX_TOL:
                raise ValueError(
                    f"max|theta_j| = {np.abs(v).max():.6g} exceeds box bound "
                    f"{self.box_bound}"
                )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dimension(self) -> int:
        return self.values.size


def project_sum_zero(v, box_bound: float = np.inf) -> Theta:
    """Orthogonal projection of a coefficient vector onto the sum-zero subspace."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("need a 1-d vector of length >= 2")
    return Theta(v - v.mean(), box_bound)


class Density:
    """A probability density on [0, 1], piecewise smooth between breakpoints."""

    breakpoints: np.ndarray

    def log_pdf(self, x) -> np.ndarray:
        raise NotImplementedError

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    def integral(self, nodes_per_panel: int = DEFAULT_NODES) -> float:
        nodes, weights = panel_rule(self.breakpoints, nodes_per_panel)
        return float(np.dot(weights, self.pdf(nodes)))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """i.i.d. draws via inverse CDF.

        Per-panel masses are precomputed by quadrature; within the located
        panel the equation F(x) = u is solved by bracketed bisection to
        width 1e-12. Deterministic given the generator state.
        """
        if count < 0:
            raise ValueError("count must be >= 0")
        if count == 0:
            return np.empty(0)
        bp = self.breakpoints
        glx, glw = gauss_legendre(12)
        nodes, weights = panel_rule(bp, 12)
        panel_mass = (self.pdf(nodes) * weights).reshape(-1, 12).sum(axis=1)
        # panel_rule drops zero-width panels; recover the surviving edges
        keep = np.diff(bp) > 0
        left = bp[:-1][keep]
        right = bp[1:][keep]
        cum = np.concatenate([[0.0], np.cumsum(panel_mass)])
        total = cum[-1]
        u = rng.random(count) * total
        k = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, left.size - 1)
        lo = left[k].copy()
        hi = right[k].copy()
        anchor = left[k]
        target = u - cum[k]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            half = 0.5 * (mid - anchor)
            pts = anchor[:, None] + half[:, None] * (glx[None, :] + 1.0)
            f = self.pdf(pts.ravel()).reshape(count, -1)
            cdf_local = (f * glw).sum(axis=1) * half
            go_right = cdf_local < target
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
            if (hi - lo).max() < _SAMPLE_TOL:
                break
        return 0.5 * (lo + hi)


def _check_unit_interval(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("points must lie in [0, 1]")
    return x


class LogSplineDensity(Density):
    """f_theta(x) = exp(sum_j theta_j B_j(x) - c(theta)) on [0, 1]."""

    def __init__(self, basis: SplineBasis, theta: Theta,
                 nodes_per_interval: int = DEFAULT_NODES):
        if theta.dimension != basis.dimension:
            raise ValueError(
                f"theta has dimension {theta.dimension}, basis needs "
                f"{basis.dimension}"
            )
        self.basis = basis
        self.theta = theta
        self.breakpoints = basis.breakpoints
        self._nodes_per_interval = nodes_per_interval
        self.log_norm = log_norm_const(basis, theta, nodes_per_interval)

    def log_pdf(self, x) -> np.ndarray:
        x = _check_unit_interval(x)
        return self.basis.design_matrix(x) @ self.theta.values - self.log_norm


def _log_norm_from_linear(s: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """log integral of exp(s) for linear predictors s at quadrature nodes.

    s has shape (..., N); the max over nodes is subtracted before
    exponentiating (bounded by ||theta||_inf via the partition of unity).
    """
    smax = s.max(axis=-1, keepdims=True)
    return smax[..., 0] + np.log(np.exp(s - smax) @ weights)


def log_norm_values(basis: SplineBasis, values: np.ndarray,
                    nodes_per_interval: int = DEFAULT_NODES):
    """c(theta) for one raw coefficient vector or a batch of rows."""
    _, weights, design = basis.quadrature(nodes_per_interval)
    return _log_norm_from_linear(np.asarray(values, float) @ design.T, weights)


def log_norm_const(basis: SplineBasis, theta: Theta,
                   nodes_per_interval: int = DEFAULT_NODES) -> float:
    """Normalizer c(theta) = log int_0^1 exp(sum_j theta_j B_j(x)) dx."""
    if theta.dimension != basis.dimension:
        raise ValueError("theta/basis dimension mismatch")
    return float(log_norm_values(basis, theta.values, nodes_per_interval))


def grad_log_norm_values(basis: SplineBasis, values: np.ndarray,
                         nodes_per_interval: int = DEFAULT_NODES) -> np.ndarray:
    _, weights, design = basis.quadrature(nodes_per_interval)
    s = design @ np.asarray(values, float)
    s -= s.max()
    g = np.exp(s) * weights
    moments = g @ design
    return moments / g.sum()


def grad_log_norm(basis: SplineBasis, theta: Theta,
                  nodes_per_interval: int = DEFAULT_NODES) -> np.ndarray:
    """Gradient of c(theta): the mean map (E_{f_theta}[B_j(X)])_j.

    Components are positive and sum to 1 by the partition of unity.
    """
    if theta.dimension != basis.dimension:
        raise ValueError("theta/basis dimension mismatch")
    return grad_log_norm_values(basis, theta.values, nodes_per_interval)


def mean_map_and_covariance(basis: SplineBasis, values: np.ndarray,
                            nodes_per_interval: int = DEFAULT_NODES):
    """(E[B], Cov[B]) under f_theta; the covariance is grad^2 c(theta)."""
    _, weights, design = basis.quadrature(nodes_per_interval)
    s = design @ np.asarray(values, float)
    s -= s.max()
    g = np.exp(s) * weights
    g /= g.sum()
    mean = g @ design
    second = design.T @ (g[:, None] * design)
    return mean, second - np.outer(mean, mean)


def log_pdf(d: LogSplineDensity, x) -> np.ndarray | float:
    """log f_theta(x); finite for every x in [0, 1]."""
    out = d.log_pdf(x)
    return float(out[0]) if np.isscalar(x) or np.ndim(x) == 0 else out


def sample_iid(d: LogSplineDensity, count: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. draws from f_theta (inverse-CDF; reproducible given the rng)."""
    return d.sample(count, rng)


class PiecewiseConstantDensity(Density):
    """Step density with given cell probabilities on a breakpoint grid."""

    def __init__(self, edges, probs):
        edges = np.asarray(edges, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing with >= 2 entries")
        if edges[0] != 0.0 or edges[-1] != 1.0:
            raise ValueError("edges must span [0, 1]")
        if probs.shape != (edges.size - 1,) or np.any(probs < 0):
            raise ValueError("need one nonnegative probability per cell")
        total = probs.sum()
        if not np.isclose(total, 1.0, rtol=0, atol=1e-9):
            raise ValueError(f"cell probabilities sum to {total}, expected 1")
        self.breakpoints = edges
        self.cell_probs = probs / total
        widths = np.diff(edges)
        with np.errstate(divide="ignore"):
            self._log_heights = np.log(self.cell_probs / widths)

    def log_pdf(self, x) -> np.ndarray:
        x = _check_unit_interval(x)
        k = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1,
                    0, self.cell_probs.size - 1)
        return self._log_heights[k]


class AnalyticDensity(Density):
    """Density proportional to exp(log_shape(x)), normalized by quadrature.

    ``breakpoints`` should resolve any kinks of ``log_shape`` (panels are
    assumed smooth); the normalizer is computed on that panel grid.
    """

    def __init__(self, log_shape, breakpoints, nodes_per_panel: int = DEFAULT_NODES):
        self._log_shape = log_shape
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        if self.breakpoints[0] != 0.0 or self.breakpoints[-1] != 1.0:
            raise ValueError("breakpoints must span [0, 1]")
        nodes, weights = panel_rule(self.breakpoints, nodes_per_panel)
        s = np.asarray(log_shape(nodes), dtype=float)
        smax = s.max()
        self.log_norm = smax + np.log(np.dot(weights, np.exp(s - smax)))

    def log_pdf(self, x) -> np.ndarray:
        x = _check_unit_interval(x)
        return np.asarray(self._log_shape(x), dtype=float) - self.log_norm


class MixtureDensity(Density):
    """Finite mixture of densities with normalized positive weights."""

    def __init__(self, components, weights):
        weights = np.asarray(weights, dtype=float)
        if len(components) == 0 or weights.shape != (len(components),):
            raise ValueError("need one weight per component")
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")
        self.components = list(components)
        self.weights = weights / weights.sum()
        self.breakpoints = merge_breakpoints(
            *(c.breakpoints for c in self.components)
        )

    def log_pdf(self, x) -> np.ndarray:
        x = _check_unit_interval(x)
        logs = np.stack([c.log_pdf(x) for c in self.components])
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)[:, None]
        stacked = logs + logw
        m = stacked.max(axis=0)
        out = m + np.log(np.exp(stacked - m).sum(axis=0))
        return np.where(np.isfinite(m), out, -np.inf)
