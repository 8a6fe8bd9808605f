"""Per-model posterior computation and the hierarchical index posterior.

The log posterior over coefficients is concave (linear likelihood term minus
n times the convex normalizer), so the MAP is found by projected Newton on
the sum-zero hyperplane, the sampler is an adaptive random-walk Metropolis
on the free coordinates, and the marginal likelihood is estimated by
importance sampling from a Laplace proposal anchored at the MAP.

All posterior ratios are invariant to the product of true-density values,
so computations use plain likelihoods rather than likelihood ratios.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .density import (Density, Theta, log_norm_values, mean_map_and_covariance)
from .metrics import batch_distances
from .priors import IndexPrior, ModelSpec, slab_free_volume

MAP_TOL = 1e-8
MAP_MAX_ITER = 200
TARGET_ACCEPT = 0.234
MIN_ESS = 10.0


class InferenceError(RuntimeError):
    """Raised when a sampler or estimator signals an unusable result."""


class ConvergenceError(InferenceError):
    """MAP search hit the iteration cap; carries the best iterate found."""

    def __init__(self, message: str, best: Theta):
        super().__init__(message)
        self.best = best

    def __reduce__(self):
        return (ConvergenceError, (self.args[0], self.best))


@dataclass(frozen=True)
class PosteriorRun:
    """Everything produced for one model on one data set."""

    spec: ModelSpec
    draws: np.ndarray  # (retained, J), sum-zero rows inside the box
    log_marginal: float
    log_marginal_se: float
    map: Theta
    acceptance_rate: float
    seed: int


@dataclass(frozen=True)
class IndexPosterior:
    """Posterior over the model index; probabilities align with indices."""

    indices: tuple[float, ...]
    log_weights: np.ndarray  # log lambda_g + estimated log marginal
    probabilities: np.ndarray
    log_marginal_ses: np.ndarray

    def probability_of(self, gamma: float) -> float:
        return float(self.probabilities[self.indices.index(gamma)])


def _check_data(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("data must be a nonempty 1-d array")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("observations must lie in [0, 1]")
    return x


def project_box_sum_zero(v: np.ndarray, M: float) -> np.ndarray:
    """Euclidean projection onto {sum theta = 0, ||theta||_inf <= M}.

    Solved as clip(v - nu) with the shift nu bisected until the clipped
    coordinates sum to zero (the sum is monotone in nu).
    """
    v = np.asarray(v, dtype=float)
    if M == 0:
        return np.zeros_like(v)
    lo = v.min() - M - 1.0
    hi = v.max() + M + 1.0
    for _ in range(80):
        nu = 0.5 * (lo + hi)
        s = np.clip(v - nu, -M, M).sum()
        if s > 0:
            lo = nu
        else:
            hi = nu
    out = np.clip(v - 0.5 * (lo + hi), -M, M)
    free = np.abs(out) < M
    if np.any(free):
        out[free] -= out.sum() / np.count_nonzero(free)
    return out


def _sufficient_stats(spec: ModelSpec, data: np.ndarray) -> np.ndarray:
    # sorting first makes the sums, and hence everything downstream,
    # bitwise invariant under permutations of the data
    return spec.basis.design_matrix(np.sort(data)).sum(axis=0)


def _log_lik(spec: ModelSpec, b: np.ndarray, n: int, values: np.ndarray) -> float:
    return float(values @ b - n * log_norm_values(spec.basis, values))


def _hyperplane_frame(J: int) -> np.ndarray:
    """Orthonormal basis of the sum-zero subspace (columns)."""
    a = np.eye(J) - np.full((J, J), 1.0 / J)
    # stable orthonormalization of the projector's range
    u, _, _ = np.linalg.svd(a)
    return u[:, : J - 1]


def map_estimate(spec: ModelSpec, data, tol: float = MAP_TOL,
                 max_iter: int = MAP_MAX_ITER, start=None) -> Theta:
    """Posterior mode over the box-constrained sum-zero slab.

    Projected Newton with Armijo backtracking; the objective is concave so
    any stationary feasible point is the global MAP. Convergence is declared
    when the projected-gradient residual (per-observation scale) drops below
    ``tol``; interior points satisfy the gradient condition, boundary points
    the KKT condition.
    """
    data = _check_data(data)
    if max_iter < 1:
        raise ValueError("iteration cap must be >= 1")
    n = data.size
    J, M = spec.J, spec.M
    b = _sufficient_stats(spec, data)
    if M == 0:
        return Theta(np.zeros(J), 0.0)
    theta = project_box_sum_zero(np.zeros(J) if start is None else np.asarray(start, float), M)
    frame = _hyperplane_frame(J)

    def residual_at(v: np.ndarray, g: np.ndarray) -> float:
        return float(np.abs(v - project_box_sum_zero(v + g / n, M)).max())

    def gradient_at(v: np.ndarray) -> np.ndarray:
        mean, _ = mean_map_and_covariance(spec.basis, v)
        return b - n * mean

    def newton_direction(theta, grad, cov):
        # Coordinates pinned at the box with an outward multiplier-adjusted
        # gradient stay fixed; Newton runs on the free block under the
        # sum-zero constraint (bordered KKT system).
        free = np.ones(J, dtype=bool)
        for _ in range(2):
            nu = grad[free].mean() if free.any() else 0.0
            adj = grad - nu
            free = ~(((theta >= M - 1e-10) & (adj > 0))
                     | ((theta <= -M + 1e-10) & (adj < 0)))
        k = int(free.sum())
        if k < 2:
            return None
        h = n * cov[np.ix_(free, free)]
        h[np.diag_indices_from(h)] += 1e-12 * n
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = h
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[:k] = grad[free]
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            return None
        step = np.zeros(J)
        step[free] = sol[:k]
        return step

    value = _log_lik(spec, b, n, theta)
    resid = math.inf
    for _ in range(max_iter):
        mean, cov = mean_map_and_covariance(spec.basis, theta)
        grad = b - n * mean
        resid = residual_at(theta, grad)
        if resid <= tol:
            return Theta(theta, M)
        step = newton_direction(theta, grad, cov)
        if step is None:
            reduced = frame.T @ (n * cov) @ frame
            reduced[np.diag_indices_from(reduced)] += 1e-12 * n
            step = frame @ np.linalg.solve(reduced, frame.T @ grad)
        t = 1.0
        improved = False
        for _ in range(40):
            cand = project_box_sum_zero(theta + t * step, M)
            cand_value = _log_lik(spec, b, n, cand)
            if cand_value > value:
                theta, value = cand, cand_value
                improved = True
                break
            t *= 0.5
        if not improved:
            # Near the optimum the objective gain drops under float noise;
            # a full Newton step still contracts the residual quadratically.
            cand = project_box_sum_zero(theta + step, M)
            if np.abs(cand - theta).max() <= 1e-4:
                cand_resid = residual_at(cand, gradient_at(cand))
                if cand_resid < resid:
                    theta = cand
                    value = _log_lik(spec, b, n, theta)
                    improved = True
        if not improved:
            t = 1.0 / n
            for _ in range(40):
                cand = project_box_sum_zero(theta + t * grad, M)
                cand_value = _log_lik(spec, b, n, cand)
                if cand_value > value:
                    theta, value = cand, cand_value
                    improved = True
                    break
                t *= 0.5
        if not improved:
            resid = residual_at(theta, gradient_at(theta))
            if resid <= tol:
                return Theta(theta, M)
            raise ConvergenceError(
                f"MAP line search stalled at residual {resid:.3e}", Theta(theta, M))
    raise ConvergenceError(
        f"MAP did not reach tolerance {tol} in {max_iter} iterations "
        f"(residual {resid:.3e})", Theta(theta, M))


def _theta_from_free(phi: np.ndarray) -> np.ndarray:
    return np.append(phi, -phi.sum())


def _feasible_free(phi: np.ndarray, M: float) -> bool:
    s = phi.sum()
    return bool(np.abs(phi).max() <= M and abs(s) <= M)


def posterior_sample(spec: ModelSpec, data, draws: int, rng: np.random.Generator,
                     burn_frac: float = 0.5, start=None):
    """Adaptive random-walk Metropolis over the free coordinates.

    Proposal covariance and global scale adapt toward acceptance 0.234
    during burn-in and are frozen afterwards; the retained segment therefore
    satisfies detailed balance. Returns (draw_matrix, acceptance_rate) where
    the matrix rows are full J-vectors with the last coordinate filled in.
    """
    data = _check_data(data)
    if draws < 1:
        raise ValueError("need at least one retained draw")
    if not 0.0 <= burn_frac < 1.0:
        raise ValueError("burn-in fraction must be in [0, 1)")
    n = data.size
    J, M = spec.J, spec.M
    if M == 0:
        return np.zeros((draws, J)), 1.0
    b = _sufficient_stats(spec, data)
    d = J - 1
    total = int(math.ceil(draws / (1.0 - burn_frac)))
    burn = total - draws

    if start is None:
        phi = np.zeros(d)
    else:
        start = np.asarray(start, dtype=float)
        phi = start[:d].copy()
    log_post = _log_lik(spec, b, n, _theta_from_free(phi))

    scale = 2.38 / math.sqrt(d)
    chol = np.eye(d) * (0.1 * min(M, 1.0))
    mean_acc = np.zeros(d)
    m2 = np.zeros((d, d))
    seen = 0
    window = 25
    win_acc = 0

    retained = np.empty((draws, J))
    kept = 0
    accepted_post = 0
    for step in range(total):
        prop = phi + scale * (chol @ rng.standard_normal(d))
        if _feasible_free(prop, M):
            cand = _log_lik(spec, b, n, _theta_from_free(prop))
            if math.log(rng.random()) < cand - log_post:
                phi, log_post = prop, cand
                if step < burn:
                    win_acc += 1
                else:
                    accepted_post += 1
        if step < burn:
            seen += 1
            delta = phi - mean_acc
            mean_acc += delta / seen
            m2 += np.outer(delta, phi - mean_acc)
            if (step + 1) % window == 0:
                rate = win_acc / window
                scale *= math.exp(rate - TARGET_ACCEPT)
                win_acc = 0
                if seen > 4 * d:
                    cov = m2 / (seen - 1)
                    jitter = 1e-10 * (np.trace(cov) / d + 1.0)
                    try:
                        chol = np.linalg.cholesky(cov + jitter * np.eye(d))
                    except np.linalg.LinAlgError:
                        pass
        else:
            retained[kept] = _theta_from_free(phi)
            kept += 1
    acceptance = accepted_post / draws
    if acceptance == 0.0:
        raise InferenceError(
            "all post-burn-in proposals rejected; proposal scale is unusable")
    return retained, acceptance


def _laplace_proposal(spec: ModelSpec, n: int, map_theta: Theta):
    """Mean and covariance (free coordinates) of the Gaussian proposal."""
    J = spec.J
    _, cov = mean_map_and_covariance(spec.basis, map_theta.values)
    t = np.vstack([np.eye(J - 1), -np.ones(J - 1)])
    a = n * (t.T @ cov @ t)
    jitter = 1e-12 * (np.trace(a) / (J - 1) + 1.0)
    for _ in range(8):
        try:
            np.linalg.cholesky(a + jitter * np.eye(J - 1))
            break
        except np.linalg.LinAlgError:
            jitter *= 100.0
    else:
        raise InferenceError("posterior Hessian is numerically indefinite")
    cov_free = np.linalg.inv(a + jitter * np.eye(J - 1))
    return map_theta.values[: J - 1], cov_free


def log_marginal(spec: ModelSpec, data, samples: int, rng: np.random.Generator,
                 log_prior_mass: float = 0.0, map_theta: Theta | None = None,
                 pilot_draws: np.ndarray | None = None):
    """Importance-sampling estimate of the log marginal likelihood.

    Proposal: Gaussian at the MAP with the inverse negative Hessian on the
    hyperplane; draws falling outside the prior box get zero weight, which
    is the unbiased equivalent of truncating the proposal to the box. When
    the MAP is pinned at the box (the Hessian is then blind to the cutoff
    and its Gaussian is far too wide along the pinned directions), the
    proposal moments come from a short pilot chain instead.
    ``log_prior_mass`` shifts the result, i.e. scales the prior by a
    constant (used to fold in the model weight lambda_gamma).

    Returns (estimate, standard_error); raises when the effective sample
    size collapses below 10.
    """
    data = _check_data(data)
    if samples < 100:
        raise ValueError("need at least 100 importance samples")
    n = data.size
    J, M = spec.J, spec.M
    b = _sufficient_stats(spec, data)
    if M == 0:
        return _log_lik(spec, b, n, np.zeros(J)) + log_prior_mass, 0.0
    if map_theta is None:
        map_theta = map_estimate(spec, data)
    d = J - 1
    pinned = bool(np.abs(map_theta.values).max() >= M - 1e-9)

    def moment_proposal(draw_matrix):
        phi_pilot = np.asarray(draw_matrix)[:, :d]
        mu = phi_pilot.mean(axis=0)
        cov = 1.3 * np.cov(phi_pilot, rowvar=False).reshape(d, d)
        cov[np.diag_indices_from(cov)] += 1e-10 * (M * M)
        return mu, cov

    log_vol = math.log(slab_free_volume(J, M))

    def sample_slab_free(count):
        out = np.empty((count, d))
        filled = 0
        while filled < count:
            cand = rng.uniform(-M, M, size=(max(count - filled, 64), d))
            ok = np.abs(cand.sum(axis=1)) <= M
            take = min(int(ok.sum()), count - filled)
            out[filled:filled + take] = cand[np.flatnonzero(ok)[:take]]
            filled += take
        return out

    def draw_weights(mu, cov_free, mixture):
        chol = np.linalg.cholesky(cov_free)
        norm_const = -0.5 * d * math.log(2.0 * math.pi) \
            - np.log(np.diag(chol)).sum()
        if mixture:
            # Defensive three-component proposal: the pilot-moment Gaussian,
            # a 3x-wider shell for underestimated covariances, and a uniform
            # slab component that floors the density everywhere feasible.
            z = rng.standard_normal((samples, d))
            comp = rng.random(samples)
            z[comp < 0.125] *= 3.0
            phi = mu[None, :] + z @ chol.T
            from_slab = comp >= 0.925
            n_slab = int(from_slab.sum())
            if n_slab:
                phi[from_slab] = sample_slab_free(n_slab)
            diff = phi - mu[None, :]
            y = solve_triangular(chol, diff.T, lower=True)
            r2 = (y * y).sum(axis=0)
            log_q = np.logaddexp(
                np.logaddexp(
                    math.log(0.800) - 0.5 * r2 + norm_const,
                    math.log(0.125) - r2 / 18.0 - d * math.log(3.0) + norm_const),
                math.log(0.075) - log_vol)
        else:
            z = rng.standard_normal((samples, d))
            phi = mu[None, :] + z @ chol.T
            log_q = -0.5 * (z * z).sum(axis=1) + norm_const
        last = -phi.sum(axis=1)
        feasible = (np.abs(phi).max(axis=1) <= M) & (np.abs(last) <= M)
        thetas = np.hstack([phi, last[:, None]])
        log_lik = thetas @ b - n * log_norm_values(spec.basis, thetas)
        return np.where(feasible, log_lik - log_vol - log_q, -np.inf)

    if pinned and pilot_draws is not None:
        proposals = [(*moment_proposal(pilot_draws), True)]
    elif pinned:
        proposals = []
    else:
        proposals = [(*_laplace_proposal(spec, n, map_theta), False)]

    ess = 0.0
    for attempt in range(2):
        if attempt >= len(proposals):
            fresh, _ = posterior_sample(spec, data, max(2000, samples), rng,
                                        start=map_theta.values)
            proposals.append((*moment_proposal(fresh), True))
        mu, cov_free, mixture = proposals[attempt]
        log_w = draw_weights(mu, cov_free, mixture)
        m = log_w.max()
        if np.isfinite(m):
            w = np.exp(log_w - m)
            ess = w.sum() ** 2 / (w * w).sum()
            if ess >= MIN_ESS:
                mean_w = w.mean()
                estimate = m + math.log(mean_w) + log_prior_mass
                se = float(w.std(ddof=1) / (mean_w * math.sqrt(samples)))
                return float(estimate), se
    raise InferenceError(
        f"importance proposal too poor: effective sample size {ess:.1f} < {MIN_ESS}")


def aggregate_index_posterior(indices, weights, log_marginals,
                              log_marginal_ses=None) -> IndexPosterior:
    """Normalize per-model evidence into an index posterior (pure algebra)."""
    lw = np.log(np.asarray(weights, dtype=float)) + np.asarray(log_marginals, dtype=float)
    m = lw.max()
    if not np.isfinite(m):
        raise InferenceError("all model marginals vanished")
    probs = np.exp(lw - m)
    probs /= probs.sum()
    ses = np.zeros_like(lw) if log_marginal_ses is None \
        else np.asarray(log_marginal_ses, dtype=float)
    return IndexPosterior(tuple(float(g) for g in indices), lw, probs, ses)


def _check_alignment(models, prior: IndexPrior) -> None:
    if len(models) != len(prior.indices):
        raise ValueError("model list and index prior have different lengths")
    for spec, gamma in zip(models, prior.indices):
        if spec.gamma != gamma:
            raise ValueError(
                f"model order must match prior indices ({spec.gamma} vs {gamma})")


def index_posterior(models, prior: IndexPrior, data, rng: np.random.Generator,
                    is_samples: int = 2000) -> IndexPosterior:
    """Posterior over the model index from per-model marginal likelihoods.

    Ties in any downstream argmax are broken toward the smaller gamma, which
    the strictly increasing index order makes automatic.
    """
    _check_alignment(models, prior)
    data = _check_data(data)
    streams = rng.spawn(len(models))
    lms, ses = [], []
    for spec, child in zip(models, streams):
        lm, se = log_marginal(spec, data, is_samples, child)
        lms.append(lm)
        ses.append(se)
    return aggregate_index_posterior(prior.indices, prior.weights, lms, ses)


def bayes_factor(model1: ModelSpec, model2: ModelSpec, prior: IndexPrior,
                 data, rng: np.random.Generator, is_samples: int = 2000) -> float:
    """Bayes factor (lambda_2 m_2)/(lambda_1 m_1) of model 2 against model 1."""
    if len(prior.indices) != 2:
        raise ValueError("the Bayes factor needs exactly two models")
    post = index_posterior([model1, model2], prior, data, rng, is_samples)
    return float(math.exp(post.log_weights[1] - post.log_weights[0]))


def posterior_ball_mass(runs, index_post: IndexPosterior, f0: Density,
                        radius: float) -> float:
    """Hierarchical posterior mass outside the Hellinger ball of ``radius``.

    Mixture estimator: sum over models of index probability times the
    fraction of that model's draws at distance >= radius from f0.
    """
    if len(runs) != len(index_post.indices):
        raise ValueError("runs must align with the index posterior")
    total = 0.0
    for run, gamma, prob in zip(runs, index_post.indices, index_post.probabilities):
        if run.spec.gamma != gamma:
            raise ValueError("run order must match the index posterior")
        if run.draws.shape[0] == 0:
            raise ValueError("posterior run has no draws")
        dist = batch_distances(f0, run.spec.basis, run.draws,
                               kinds=("hellinger",))["hellinger"]
        total += prob * float(np.count_nonzero(dist >= radius)) / dist.size
    return total


def run_posterior(spec: ModelSpec, data, mcmc_draws: int = 1000,
                  is_samples: int = 1000, seed: int = 0) -> PosteriorRun:
    """MAP, posterior draws and marginal likelihood for one model."""
    rng = np.random.default_rng(seed)
    map_theta = map_estimate(spec, data)
    draws, acceptance = posterior_sample(spec, data, mcmc_draws, rng,
                                         start=map_theta.values)
    lm, se = log_marginal(spec, data, is_samples, rng, map_theta=map_theta,
                          pilot_draws=draws)
    return PosteriorRun(spec=spec, draws=draws, log_marginal=lm,
                        log_marginal_se=se, map=map_theta,
                        acceptance_rate=acceptance, seed=seed)
