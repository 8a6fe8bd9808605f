"""Distances between densities on [0, 1].

All integrals run on composite Gauss-Legendre panels over the union of the
two densities' breakpoint grids, so integrands are smooth per panel.
"""
from __future__ import annotations

import numpy as np

from .density import Density
from .quadrature import DEFAULT_NODES, merge_breakpoints, panel_rule
from .splines import SplineBasis

NORMALIZATION_TOL = 1e-6

# The generic contraction distance is instantiated as the Hellinger distance
# (its square is convex in the first argument), so the "bounded above by
# Hellinger" requirement holds with equality.
CONTRACTION_DISTANCE_NAME = "hellinger"


def _pair_rule(f: Density, g: Density, nodes_per_panel: int):
    bp = merge_breakpoints(f.breakpoints, g.breakpoints)
    return panel_rule(bp, nodes_per_panel)


def _check_normalized(d: Density, nodes_per_panel: int) -> None:
    err = abs(d.integral(nodes_per_panel) - 1.0)
    if err > NORMALIZATION_TOL:
        raise ValueError(f"density integrates to 1 within {err:.2e} > {NORMALIZATION_TOL}")


def hellinger(f: Density, g: Density, nodes_per_panel: int = DEFAULT_NODES) -> float:
    """Hellinger distance ||sqrt(f) - sqrt(g)||_2; symmetric, in [0, sqrt(2)]."""
    _check_normalized(f, nodes_per_panel)
    _check_normalized(g, nodes_per_panel)
    nodes, weights = _pair_rule(f, g, nodes_per_panel)
    diff = np.sqrt(f.pdf(nodes)) - np.sqrt(g.pdf(nodes))
    return float(np.sqrt(max(np.dot(weights, diff * diff), 0.0)))


def hellinger_star(f0: Density, f: Density,
                   nodes_per_panel: int = DEFAULT_NODES) -> float:
    """Modified Hellinger distance, arguments ordered (truth, candidate).

    Weights the squared root-difference by (2/3) sqrt(f0/f) + 1/3, so it is
    not symmetric in its arguments. Raises when f vanishes somewhere f0 does
    not (the ratio is singular there).
    """
    _check_normalized(f0, nodes_per_panel)
    _check_normalized(f, nodes_per_panel)
    nodes, weights = _pair_rule(f0, f, nodes_per_panel)
    p0 = f0.pdf(nodes)
    p = f.pdf(nodes)
    singular = (p == 0) & (p0 > 0)
    if np.any(singular):
        raise ValueError("modified Hellinger undefined: candidate vanishes "
                         "where the reference is positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(p > 0, p0 / p, 0.0)
    integrand = (np.sqrt(p0) - np.sqrt(p)) ** 2 * ((2.0 / 3.0) * np.sqrt(ratio) + 1.0 / 3.0)
    return float(np.sqrt(max(np.dot(weights, integrand), 0.0)))


def l2_distance(f: Density, g: Density, nodes_per_panel: int = DEFAULT_NODES) -> float:
    """L2 distance ||f - g||_2 between densities; symmetric."""
    nodes, weights = _pair_rule(f, g, nodes_per_panel)
    diff = f.pdf(nodes) - g.pdf(nodes)
    return float(np.sqrt(max(np.dot(weights, diff * diff), 0.0)))


def batch_distances(f0: Density, basis: SplineBasis, thetas: np.ndarray,
                    kinds=("hellinger", "l2"),
                    nodes_per_panel: int = DEFAULT_NODES) -> dict[str, np.ndarray]:
    """Distances from f0 to a batch of log-spline densities at once.

    ``thetas`` is a (draws, J) matrix of sum-zero coefficient rows. Shares
    one quadrature grid and one design matrix across the whole batch, which
    is what makes per-draw posterior distances affordable.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != basis.dimension:
        raise ValueError("theta rows must match the basis dimension")
    bp = merge_breakpoints(f0.breakpoints, basis.breakpoints)
    nodes, weights = panel_rule(bp, nodes_per_panel)
    design = basis.design_matrix(nodes)
    s = thetas @ design.T
    smax = s.max(axis=1, keepdims=True)
    log_norm = smax[:, 0] + np.log(np.exp(s - smax) @ weights)
    log_f = s - log_norm[:, None]
    p0 = f0.pdf(nodes)
    out: dict[str, np.ndarray] = {}
    if "hellinger" in kinds:
        cross = np.exp(0.5 * log_f) @ (weights * np.sqrt(p0))
        out["hellinger"] = np.sqrt(np.clip(2.0 - 2.0 * cross, 0.0, 2.0))
    if "l2" in kinds:
        diff = np.exp(log_f) - p0[None, :]
        out["l2"] = np.sqrt((diff * diff) @ weights)
    if "hellinger_star" in kinds:
        with np.errstate(divide="ignore"):
            half0 = np.sqrt(p0)
        sqf = np.exp(0.5 * log_f)
        ratio = half0[None, :] / sqf
        integrand = (half0[None, :] - sqf) ** 2 * ((2.0 / 3.0) * ratio + 1.0 / 3.0)
        out["hellinger_star"] = np.sqrt(integrand @ weights)
    return out


contraction_distance = hellinger
