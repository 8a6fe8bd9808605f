"""Scikit-learn style front end for the adaptive log-spline density model.

``AdaptiveLogSplineDensity`` follows the fit / score_samples / sample
contract of ``sklearn.neighbors.KernelDensity``, so the estimator clones,
grid-searches and pipelines like any other sklearn density estimator while
the full Bayesian machinery stays available through the fitted attributes.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .density import LogSplineDensity, Theta
from .inference import aggregate_index_posterior, run_posterior
from .priors import IndexPrior, make_model_spec


def check_unit_interval(X) -> np.ndarray:
    """Validate and flatten observations into a 1-d array inside [0, 1]."""
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(
                f"this estimator models densities on [0, 1]; got "
                f"{X.shape[1]} feature columns")
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError("X must be 1-d or a single-column 2-d array")
    if X.size and (X.min() < 0.0 or X.max() > 1.0):
        raise ValueError("observations must lie in [0, 1]")
    return X


class AdaptiveLogSplineDensity(DensityMixin, BaseEstimator):
    """Adaptive Bayesian log-spline density estimation on [0, 1].

    Fits one log-spline exponential-family model per smoothness index,
    weighs them by estimated marginal likelihood, and exposes the resulting
    posterior-predictive density.

    Parameters
    ----------
    gammas : sequence of float
        Candidate smoothness indices (each > 1/2, strictly increasing).
    weights : sequence of float or None
        Prior index weights; uniform when None.
    q : int
        Spline order; must be at least the largest gamma.
    box_bound : float
        Sup-norm bound of the uniform coefficient prior.
    knot_scale : float
        Multiplier of n^(1/(2 gamma + 1)) in the knot count.
    log_factor : bool
        Use the sqrt(log n) inflated target rates in the model metadata.
    mcmc_draws, is_samples : int
        Retained Metropolis draws and importance samples per model.
    random_state : int or None
        Master seed; fitting is deterministic given it.

    Attributes
    ----------
    models_ : list of ModelSpec
    runs_ : list of PosteriorRun
    index_posterior_ : IndexPosterior
    n_samples_fit_ : int
    """

    def __init__(self, gammas=(1.0, 2.0), weights=None, q=4, box_bound=2.0,
                 knot_scale=1.0, log_factor=False, mcmc_draws=1500,
                 is_samples=1500, random_state=None):
        self.gammas = gammas
        self.weights = weights
        self.q = q
        self.box_bound = box_bound
        self.knot_scale = knot_scale
        self.log_factor = log_factor
        self.mcmc_draws = mcmc_draws
        self.is_samples = is_samples
        self.random_state = random_state

    def fit(self, X, y=None):
        """Fit the per-model posteriors and the index posterior."""
        x = check_unit_interval(X)
        if x.size < 2:
            raise ValueError("need at least two observations")
        gammas = tuple(float(g) for g in self.gammas)
        k = len(gammas)
        weights = tuple([1.0 / k] * k) if self.weights is None \
            else tuple(float(w) for w in self.weights)
        prior = IndexPrior(gammas, weights)
        seed = 0 if self.random_state is None else int(self.random_state)
        self.models_ = [
            make_model_spec(g, x.size, self.q, self.box_bound,
                            self.knot_scale, self.log_factor) for g in gammas
        ]
        self.runs_ = [
            run_posterior(spec, x, self.mcmc_draws, self.is_samples,
                          seed=int(np.random.SeedSequence((seed, x.size, i))
                                   .generate_state(1, np.uint64)[0]))
            for i, spec in enumerate(self.models_)
        ]
        self.index_posterior_ = aggregate_index_posterior(
            gammas, weights,
            [r.log_marginal for r in self.runs_],
            [r.log_marginal_se for r in self.runs_])
        self.n_samples_fit_ = int(x.size)
        self.n_features_in_ = 1
        self._fit_seed = seed
        return self

    def _per_model_log_predictive(self, x: np.ndarray):
        parts = []
        for run in self.runs_:
            design = run.spec.basis.design_matrix(x)
            draws = run.draws
            _, w, quad_design = run.spec.basis.quadrature()
            s = draws @ quad_design.T
            smax = s.max(axis=1, keepdims=True)
            log_norm = smax[:, 0] + np.log(np.exp(s - smax) @ w)
            log_f = design @ draws.T - log_norm[None, :]
            m = log_f.max(axis=1, keepdims=True)
            parts.append(m[:, 0] + np.log(np.mean(np.exp(log_f - m), axis=1)))
        return np.column_stack(parts)

    def score_samples(self, X):
        """Log posterior-predictive density at the query points."""
        check_is_fitted(self, "runs_")
        x = check_unit_interval(X)
        log_pred = self._per_model_log_predictive(x)
        lw = np.log(self.index_posterior_.probabilities)[None, :]
        stacked = log_pred + lw
        m = stacked.max(axis=1, keepdims=True)
        return (m[:, 0] + np.log(np.exp(stacked - m).sum(axis=1)))

    def score(self, X, y=None):
        """Total log posterior-predictive likelihood of X."""
        return float(np.sum(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None):
        """Draws from the posterior predictive (model, then coefficients)."""
        check_is_fitted(self, "runs_")
        seed = self._fit_seed + 1 if random_state is None else int(random_state)
        rng = np.random.default_rng(seed)
        probs = self.index_posterior_.probabilities
        which_model = rng.choice(len(self.runs_), size=n_samples, p=probs)
        out = np.empty(n_samples)
        for k, run in enumerate(self.runs_):
            sel = np.flatnonzero(which_model == k)
            if sel.size == 0:
                continue
            rows = rng.integers(0, run.draws.shape[0], size=sel.size)
            for pos, row in zip(sel, rows):
                dens = LogSplineDensity(
                    run.spec.basis,
                    Theta(run.draws[row], run.spec.M))
                out[pos] = dens.sample(1, rng)[0]
        return out.reshape(-1, 1)

    def map_density(self, gamma=None) -> LogSplineDensity:
        """MAP density of one model (default: the most probable index)."""
        check_is_fitted(self, "runs_")
        if gamma is None:
            best = int(np.argmax(self.index_posterior_.probabilities))
        else:
            best = self.index_posterior_.indices.index(float(gamma))
        run = self.runs_[best]
        return LogSplineDensity(run.spec.basis, run.map)
