import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from logspline_bayes import (AdaptiveLogSplineDensity, TruthSpec,
                             check_unit_interval, make_truth)


def bounded_sample(n, seed=8):
    # skewed but bounded away from 0 and infinity, as the model assumes
    truth = make_truth(TruthSpec(kind="smooth_analytic", amplitude=1.2))
    return truth.sample(n, np.random.default_rng(seed))


@pytest.fixture(scope="module")
def fitted():
    est = AdaptiveLogSplineDensity(mcmc_draws=400, is_samples=400, random_state=0)
    return est.fit(bounded_sample(300))


def test_get_params_round_trip():
    est = AdaptiveLogSplineDensity(gammas=(1.0, 1.5), box_bound=3.0)
    params = est.get_params()
    assert params["gammas"] == (1.0, 1.5)
    assert params["box_bound"] == 3.0
    rebuilt = AdaptiveLogSplineDensity(**params)
    assert rebuilt.get_params() == params


def test_clone_keeps_parameters():
    est = AdaptiveLogSplineDensity(q=3, mcmc_draws=200)
    cl = clone(est)
    assert cl.q == 3 and cl.mcmc_draws == 200


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        AdaptiveLogSplineDensity().score_samples([0.5])


def test_input_validation():
    est = AdaptiveLogSplineDensity()
    with pytest.raises(ValueError):
        est.fit(np.array([0.2, 1.4]))
    with pytest.raises(ValueError):
        est.fit(np.zeros((4, 2)))
    assert check_unit_interval(np.array([[0.1], [0.9]])).shape == (2,)


def test_fit_sets_sklearn_attributes(fitted):
    assert fitted.n_features_in_ == 1
    assert fitted.n_samples_fit_ == 300
    assert len(fitted.runs_) == 2
    probs = fitted.index_posterior_.probabilities
    assert probs.sum() == pytest.approx(1.0)


def test_score_samples_is_log_density(fitted):
    grid = np.linspace(0.0, 1.0, 201)
    log_pred = fitted.score_samples(grid)
    assert np.all(np.isfinite(log_pred))
    dens = np.exp(log_pred)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=5e-3)
    # the truth peaks at the interval ends and dips at 1/2
    assert fitted.score(np.array([0.05])) > fitted.score(np.array([0.5]))


def test_fit_is_deterministic_given_random_state():
    x = bounded_sample(200, seed=3)
    a = AdaptiveLogSplineDensity(mcmc_draws=200, is_samples=200, random_state=1).fit(x)
    b = AdaptiveLogSplineDensity(mcmc_draws=200, is_samples=200, random_state=1).fit(x)
    assert a.index_posterior_.log_weights.tolist() == \
        b.index_posterior_.log_weights.tolist()
    grid = np.linspace(0, 1, 11)
    assert np.array_equal(a.score_samples(grid), b.score_samples(grid))


def test_sample_output_shape_and_range(fitted):
    draws = fitted.sample(64, random_state=5)
    assert draws.shape == (64, 1)
    assert draws.min() >= 0.0 and draws.max() <= 1.0
    again = fitted.sample(64, random_state=5)
    assert np.array_equal(draws, again)


def test_map_density_matches_best_index(fitted):
    dens = fitted.map_density()
    assert abs(dens.integral() - 1.0) <= 1e-9
    best = fitted.index_posterior_.indices[
        int(np.argmax(fitted.index_posterior_.probabilities))]
    assert fitted.map_density(best).theta.values.tolist() == \
        dens.theta.values.tolist()
