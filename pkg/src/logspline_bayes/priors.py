"""Per-model priors on the sum-zero coefficient slab and the model grid.

A model couples a smoothness index gamma with sample size n through
K_n = round(c_K * n^(1/(2 gamma + 1))) knot intervals and the target rate
eps = n^(-gamma/(2 gamma + 1)) (optionally times sqrt(log n)). The prior on
coefficients is uniform on S = {theta in [-M, M]^J : sum theta = 0}, the
simplest member of the density-bounded class the theory allows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np

from .density import Density, LogSplineDensity, Theta
from .metrics import batch_distances
from .splines import SplineBasis, build_basis


@dataclass(frozen=True)
class ModelSpec:
    """One smoothness level with its knot count, dimension and target rate.

    Instances from :func:`make_model_spec` satisfy the full grid contract;
    direct construction (used for small fixed-K exercises) only checks basic
    consistency.
    """

    gamma: float
    n: int
    q: int
    M: float
    scale: float
    K: int
    J: int
    eps: float
    log_factor: bool = False

    def __post_init__(self):
        if self.q < 1 or self.K < 1:
            raise ValueError("q and K must be positive integers")
        if self.J != self.q + self.K - 1:
            raise ValueError(f"J must equal q + K - 1 = {self.q + self.K - 1}")
        if self.M < 0:
            raise ValueError("box bound must be nonnegative")

    @cached_property
    def basis(self) -> SplineBasis:
        return build_basis(self.q, self.K)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def target_rate(gamma: float, n: int, log_factor: bool) -> float:
    eps = n ** (-gamma / (2.0 * gamma + 1.0))
    if log_factor:
        eps *= math.sqrt(math.log(n))
    return eps


def make_model_spec(gamma: float, n: int, q: int, M: float, scale: float = 1.0,
                    log_factor: bool = False) -> ModelSpec:
    """Build the model for smoothness gamma at sample size n.

    K_n = max(1, round(scale * n^(1/(2 gamma + 1)))) with half-away-from-zero
    rounding; J = q + K_n - 1; eps is the single-model target rate.
    """
    if gamma <= 0.5:
        raise ValueError("smoothness index must be strictly bigger than 1/2")
    if q < gamma:
        raise ValueError(f"spline order q={q} must be at least gamma={gamma}")
    if n < 2:
        raise ValueError("sample size must be >= 2")
    if M < 1:
        raise ValueError("box bound must be >= 1")
    if scale <= 0:
        raise ValueError("knot scale must be positive")
    raw = scale * n ** (1.0 / (2.0 * gamma + 1.0))
    K = max(1, _round_half_away(raw))
    ratio = K / n ** (1.0 / (2.0 * gamma + 1.0))
    if not (scale / 2.0 <= ratio <= 2.0 * scale):
        raise ValueError(
            f"K_n={K} breaks the knot-growth contract: K_n/n^(1/(2g+1)) = "
            f"{ratio:.4g} outside [{scale / 2.0:.4g}, {2.0 * scale:.4g}]"
        )
    return ModelSpec(gamma=gamma, n=n, q=q, M=M, scale=scale, K=K,
                     J=q + K - 1, eps=target_rate(gamma, n, log_factor),
                     log_factor=log_factor)


def make_fixed_spec(q: int, K: int, M: float, n: int = 2, gamma: float = 1.0,
                    log_factor: bool = False) -> ModelSpec:
    """Model with an explicitly chosen knot count (small worked examples)."""
    return ModelSpec(gamma=gamma, n=n, q=q, M=M, scale=1.0, K=K, J=q + K - 1,
                     eps=target_rate(gamma, n, log_factor),
                     log_factor=log_factor)


@dataclass(frozen=True)
class IndexPrior:
    """Prior weights over a finite, strictly increasing list of gamma values."""

    indices: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        idx = tuple(float(g) for g in self.indices)
        w = np.asarray(self.weights, dtype=float)
        if len(idx) == 0 or w.shape != (len(idx),):
            raise ValueError("need one weight per index")
        if any(g <= 0.5 for g in idx):
            raise ValueError("all indices must exceed 1/2")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", tuple(float(x) for x in w))


def uniform_index_prior(indices) -> IndexPrior:
    k = len(indices)
    return IndexPrior(tuple(indices), tuple([1.0 / k] * k))


@lru_cache(maxsize=256)
def _centered_cube_slab_volume(m: int) -> float:
    """Volume of {x in [-1, 1]^m : |sum x| <= 1}, exact via Irwin-Hall."""
    if m == 0:
        return 1.0

    def ih_cdf(x: Fraction) -> Fraction:
        # CDF of a sum of m iid U(0,1) at rational x, exact arithmetic
        total = Fraction(0)
        for k in range(int(x) + 1):
            term = Fraction(math.comb(m, k)) * (x - k) ** m
            total += term if k % 2 == 0 else -term
        return total / math.factorial(m)

    hi = ih_cdf(Fraction(m + 1, 2))
    lo = ih_cdf(Fraction(m - 1, 2))
    return float(2 ** m * (hi - lo))


def slab_free_volume(J: int, M: float) -> float:
    """Lebesgue volume of the feasible free coordinates.

    The slab S = {theta in [-M, M]^J : sum theta = 0} parametrized by its
    first J - 1 coordinates occupies {phi in [-M, M]^(J-1) : |sum phi| <= M},
    whose volume is M^(J-1) times an exact Irwin-Hall constant.
    """
    if J < 2:
        raise ValueError("slab volume needs J >= 2")
    return M ** (J - 1) * _centered_cube_slab_volume(J - 1)


def slab_surface_volume(J: int, M: float) -> float:
    """(J-1)-dimensional Hausdorff volume of the slab inside the hyperplane."""
    return math.sqrt(J) * slab_free_volume(J, M)


def sample_prior_theta(spec: ModelSpec, rng: np.random.Generator) -> Theta:
    """Uniform draw from the sum-zero slab via rejection on the free block."""
    J, M = spec.J, spec.M
    if J < 2:
        raise ValueError("the sum-zero slab is trivial for J < 2")
    if M == 0:
        return Theta(np.zeros(J), 0.0)
    while True:
        phi = rng.uniform(-M, M, size=J - 1)
        last = -phi.sum()
        if abs(last) <= M:
            return Theta(np.append(phi, last), M)


def sample_prior_thetas(spec: ModelSpec, count: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Matrix of slab draws, batch rejection (rows sum to zero)."""
    J, M = spec.J, spec.M
    if M == 0:
        return np.zeros((count, J))
    out = np.empty((count, J))
    filled = 0
    while filled < count:
        chunk = max(count - filled, 64)
        phi = rng.uniform(-M, M, size=(chunk, J - 1))
        last = -phi.sum(axis=1)
        ok = np.abs(last) <= M
        take = min(int(ok.sum()), count - filled)
        rows = np.flatnonzero(ok)[:take]
        out[filled:filled + take, :-1] = phi[rows]
        out[filled:filled + take, -1] = last[rows]
        filled += take
    return out


def prior_log_density(spec: ModelSpec, theta: Theta) -> float:
    """Log density of the uniform slab prior w.r.t. hyperplane surface measure.

    Constant -log vol(S) inside the box, -inf outside.
    """
    if theta.dimension != spec.J:
        raise ValueError("theta dimension does not match the model")
    if np.abs(theta.values).max() > spec.M + 1e-12:
        return -math.inf
    return -math.log(slab_surface_volume(spec.J, spec.M))


class MassEstimate(NamedTuple):
    estimate: float
    se: float
    draws: int


def prior_ball_mass(spec: ModelSpec, f0: Density, eps: float, ball: str,
                    draws: int, rng: np.random.Generator) -> MassEstimate:
    """Monte-Carlo prior mass of a distance ball around f0.

    ``ball`` selects the plain Hellinger ball A (<= eps) or the modified
    Hellinger ball W (H_*(f0, f) <= eps). Reports the hit fraction and its
    binomial standard error.
    """
    if draws < 1:
        raise ValueError("need at least one draw")
    if ball not in ("A_hellinger", "W_star"):
        raise ValueError(f"unknown ball kind {ball!r}")
    thetas = sample_prior_thetas(spec, draws, rng)
    kind = "hellinger" if ball == "A_hellinger" else "hellinger_star"
    dist = batch_distances(f0, spec.basis, thetas, kinds=(kind,))[kind]
    hits = float(np.count_nonzero(dist <= eps)) / draws
    se = math.sqrt(hits * (1.0 - hits) / draws)
    return MassEstimate(hits, se, draws)


def log_spline_from_values(spec: ModelSpec, values: np.ndarray) -> LogSplineDensity:
    """Density for one coefficient row (box checked against the spec)."""
    return LogSplineDensity(spec.basis, Theta(np.asarray(values, float), spec.M))
