"""Covering numbers, Hausdorff alpha-entropy and the tail-mass bound checker
on finite families of densities.

Ball centers are restricted to the family members themselves: the
definition's infimum over arbitrary integrable centers is uncomputable, and
computing both the covering number and the entropy under the same
restriction keeps every comparison between them exact. Balls are open
(strict radius), matching the entropy definition. Coverings are
disjointified before summing, which never increases the entropy sum, so the
exact optimum is the minimum over set partitions whose blocks each fit in
some member-centered ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import Density, MixtureDensity
from .metrics import hellinger
from .quadrature import DEFAULT_NODES, merge_breakpoints, panel_rule

EXACT_LIMIT = 12


@dataclass
class DiscreteFamily:
    """Finite set of densities with prior masses and a designated truth.

    Masses are positive and sum to at most 1 (subfamilies keep their
    original masses). The pairwise Hellinger matrix is computed lazily.
    """

    members: list
    masses: np.ndarray
    truth: Density

    def __init__(self, members, masses, truth: Density):
        masses = np.asarray(masses, dtype=float)
        if len(members) == 0 or masses.shape != (len(members),):
            raise ValueError("need one mass per member")
        if np.any(masses <= 0):
            raise ValueError("masses must be positive")
        if masses.sum() > 1.0 + 1e-9:
            raise ValueError(f"masses sum to {masses.sum()} > 1")
        for i, m in enumerate(members):
            err = abs(m.integral() - 1.0)
            if err > 1e-9:
                raise ValueError(f"member {i} integrates to 1 within {err:.2e} only")
        self.members = list(members)
        self.masses = masses
        self.truth = truth
        self._dist: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.members)

    def distance_matrix(self) -> np.ndarray:
        if self._dist is None:
            m = self.size
            d = np.zeros((m, m))
            for i in range(m):
                for j in range(i + 1, m):
                    d[i, j] = d[j, i] = hellinger(self.members[i], self.members[j])
            self._dist = d
        return self._dist

    def restrict(self, indices) -> "DiscreteFamily":
        indices = list(indices)
        sub = DiscreteFamily([self.members[i] for i in indices],
                             self.masses[indices], self.truth)
        if self._dist is not None:
            sub._dist = self._dist[np.ix_(indices, indices)]
        return sub

    def total_mass(self) -> float:
        return float(self.masses.sum())


def _ball_masks(dist: np.ndarray, delta: float) -> list[int]:
    """Bitmask of members inside the open delta-ball around each member."""
    m = dist.shape[0]
    masks = []
    for c in range(m):
        mask = 0
        for j in range(m):
            if dist[c, j] < delta:
                mask |= 1 << j
        masks.append(mask)
    return masks


def _min_partition_cost(ball_masks: list[int], block_cost) -> float:
    """Minimum over set partitions of sum(block_cost(block_mask)).

    Each block must be contained in at least one member-centered ball.
    Subset DP over bitmasks: 3^m submask enumeration, fine up to m = 12.
    """
    m = len(ball_masks)
    full = (1 << m) - 1
    feasible = np.zeros(full + 1, dtype=bool)
    for mask in range(1, full + 1):
        feasible[mask] = any((mask & ~bm) == 0 for bm in ball_masks)
    best = np.full(full + 1, np.inf)
    best[0] = 0.0
    for mask in range(1, full + 1):
        low = mask & (-mask)
        sub = mask
        while sub:
            if (sub & low) and feasible[sub]:
                cand = block_cost(sub) + best[mask ^ sub]
                if cand < best[mask]:
                    best[mask] = cand
            sub = (sub - 1) & mask
    return float(best[full])


def covering_number(family: DiscreteFamily, delta: float, mode: str = "exact") -> int:
    """Minimal number of member-centered open delta-balls covering the family.

    ``exact`` enumerates (allowed up to 12 members); ``greedy`` is the
    standard set-cover upper bound, within a factor 1 + ln(size) of exact.
    """
    if delta <= 0:
        raise ValueError("radius must be positive")
    dist = family.distance_matrix()
    masks = _ball_masks(dist, delta)
    full = (1 << family.size) - 1
    if mode == "exact":
        if family.size > EXACT_LIMIT:
            raise ValueError(f"exact mode limited to {EXACT_LIMIT} members")
        return int(_min_partition_cost(masks, lambda blk: 1.0))
    if mode == "greedy":
        uncovered = full
        count = 0
        while uncovered:
            gains = [bin(bm & uncovered).count("1") for bm in masks]
            pick = int(np.argmax(gains))
            uncovered &= ~masks[pick]
            count += 1
        return count
    raise ValueError(f"unknown mode {mode!r}")


def hausdorff_alpha_entropy(family: DiscreteFamily, delta: float, alpha: float) -> float:
    """log inf of sum Pi(B_j)^alpha over disjoint delta-ball coverings.

    At alpha = 0 this reduces to the log covering number; at alpha = 1 every
    disjoint covering sums to the family's total mass.
    """
    if delta <= 0:
        raise ValueError("radius must be positive")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if family.size > EXACT_LIMIT:
        raise ValueError(f"exact enumeration limited to {EXACT_LIMIT} members")
    dist = family.distance_matrix()
    masks = _ball_masks(dist, delta)
    masses = family.masses
    m = family.size
    mass_of = np.zeros(1 << m)
    for mask in range(1, 1 << m):
        low_idx = (mask & (-mask)).bit_length() - 1
        mass_of[mask] = mass_of[mask & (mask - 1)] + masses[low_idx]

    if alpha == 0.0:
        cost = lambda blk: 1.0
    else:
        cost = lambda blk: mass_of[blk] ** alpha
    return math.log(_min_partition_cost(masks, cost))


def walker_predictive(family: DiscreteFamily, subset, data_prefix) -> MixtureDensity:
    """Posterior-mixture density restricted to a member subset.

    Weights are proportional to prior mass times the likelihood of the
    observed prefix; an empty prefix gives the (restricted) prior predictive.
    """
    subset = list(subset)
    if len(subset) == 0:
        raise ValueError("subset must be nonempty")
    if len(set(subset)) != len(subset):
        raise ValueError("subset indices must be distinct")
    x = np.asarray(data_prefix, dtype=float)
    log_w = np.log(family.masses[subset])
    if x.size:
        for pos, j in enumerate(subset):
            log_w[pos] += float(np.sum(family.members[j].log_pdf(x)))
    if not np.any(np.isfinite(log_w)):
        raise ValueError("all restricted members have zero likelihood")
    log_w -= log_w.max()
    return MixtureDensity([family.members[j] for j in subset], np.exp(log_w))


def renyi_integral(f: Density, f0: Density, alpha: float,
                   nodes_per_panel: int = DEFAULT_NODES) -> float:
    """rho_alpha = int f^alpha f0^(1-alpha); equals 1 iff the densities agree."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    bp = merge_breakpoints(f.breakpoints, f0.breakpoints)
    nodes, weights = panel_rule(bp, nodes_per_panel)
    log_int = alpha * f.log_pdf(nodes) + (1.0 - alpha) * f0.log_pdf(nodes)
    vals = np.where(np.isfinite(log_int), np.exp(log_int), 0.0)
    return float(np.dot(weights, vals))


@dataclass(frozen=True)
class TailBoundReport:
    lhs_estimate: float
    lhs_se: float
    rhs_bound: float
    passed: bool
    tail_indices: tuple[int, ...]
    entropy_value: float


def tail_bound_check(family: DiscreteFamily, r: float, eps: float, alpha: float,
                        n: int, replications: int,
                        rng: np.random.Generator) -> TailBoundReport:
    """Monte-Carlo check of the alpha-moment bound on the tail likelihood mass.

    The tail set D collects members at Hellinger distance >= r*eps from the
    truth. The left side E[(int_D R_n dPi)^alpha] is estimated from
    replicated samples of size n drawn from the truth; the right side is
    exp(J(eps, D, alpha) + (alpha-1)/2 (r-2)^2 n eps^2). Passes when the
    estimate minus three standard errors stays below the bound.
    """
    if r <= 2:
        raise ValueError("the bound needs r > 2")
    if eps <= 0 or n < 1:
        raise ValueError("eps must be positive and n >= 1")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if replications < 100:
        raise ValueError("need at least 100 replications")
    f0 = family.truth
    dist_to_truth = np.array([hellinger(f, f0) for f in family.members])
    tail = tuple(int(i) for i in np.flatnonzero(dist_to_truth >= r * eps))
    if not tail:
        return TailBoundReport(0.0, 0.0, 0.0, True, (), -math.inf)
    sub = family.restrict(tail)
    j_value = hausdorff_alpha_entropy(sub, eps, alpha)
    rhs = math.exp(j_value + 0.5 * (alpha - 1.0) * (r - 2.0) ** 2 * n * eps * eps)

    x = f0.sample(replications * n, rng).reshape(replications, n)
    flat = x.ravel()
    log_f0 = f0.log_pdf(flat).reshape(replications, n).sum(axis=1)
    per_member = np.empty((len(tail), replications))
    for pos, j in enumerate(tail):
        log_fj = family.members[j].log_pdf(flat).reshape(replications, n).sum(axis=1)
        per_member[pos] = math.log(family.masses[j]) + log_fj - log_f0
    m = per_member.max(axis=0)
    log_s = m + np.log(np.exp(per_member - m).sum(axis=0))
    samples = np.exp(alpha * log_s)
    lhs = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(replications))
    return TailBoundReport(lhs, se, rhs, lhs - 3.0 * se <= rhs, tail, j_value)
