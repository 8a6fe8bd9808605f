"""Experiment drivers: contraction-rate slopes, model-index concentration,
Bayes-factor direction, and the lower-bound calculator for the radius
multiplier of the tail-probability bound.

Reproducibility contract: every grid cell (n, replication) derives its own
seeds from the master seed via
``SeedSequence((master_seed, n, replication, stream))`` with stream 0 for
the data and stream k for model k (1-based), so any cell can be recomputed
in isolation and results do not depend on worker scheduling.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .density import AnalyticDensity, Density, LogSplineDensity, Theta
from .inference import (InferenceError, aggregate_index_posterior, log_marginal,
                        map_estimate, posterior_sample)
from .metrics import batch_distances
from .priors import make_model_spec
from .splines import build_basis


@dataclass(frozen=True)
class RateBoundConstants:
    """Constants entering the lower bound for the contraction radius multiplier.

    ``c`` scales the log-n floor on n*eps^2, ``j`` bounds the weight-sum
    growth, ``g`` the entropy growth, ``l`` the prior-ratio growth, ``alpha``
    is the moment exponent, ``h`` the rate-band width, ``k`` the constant of
    the refined small-ball condition and ``f`` the small-ball exponent. The
    standing assumption is 1 - alpha > 18 * alpha * l.
    """

    c: float
    j: float
    g: float
    l: float
    alpha: float
    h: float
    k: float = 1.0
    f: float = 1.0
    E_by_index: tuple[tuple[float, float], ...] | None = None
    mu_by_index: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.c <= 0 or self.l <= 0 or self.f <= 0:
            raise ValueError("c, l and f must be positive")
        if self.j < 0 or self.g < 0:
            raise ValueError("j and g must be nonnegative")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.h < 1.0:
            raise ValueError("h must be at least 1")
        if self.k < 1.0:
            raise ValueError("k must be at least 1")

    @property
    def standing_assumption_ok(self) -> bool:
        return 1.0 - self.alpha > 18.0 * self.alpha * self.l


def r_min_constant(c: RateBoundConstants, variant: str = "base") -> float:
    """Smallest admissible radius multiplier r for the given constants.

    The refined variant multiplies the two alpha terms by k; with k = 1 both
    variants coincide.
    """
    denom = 1.0 - c.alpha - 18.0 * c.alpha * c.l
    if denom <= 0:
        raise ValueError("standing assumption violated: 1 - alpha <= 18*alpha*l")
    if variant == "base":
        numer = c.c + c.j + c.g + 3.0 * c.alpha + 2.0 * c.alpha * c.c
    elif variant == "refined":
        numer = c.c + c.j + c.g + 3.0 * c.alpha * c.k + 2.0 * c.alpha * c.c * c.k
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return 18.0 * numer / denom + math.sqrt(c.h) + 1.0


@dataclass(frozen=True)
class TruthSpec:
    """Recipe for the data-generating density.

    ``in_model`` places a log-spline density at fixed coefficients;
    ``smooth_analytic`` uses exp(amplitude * cos(2 pi x)), infinitely smooth;
    ``holder`` uses exp(hold_scale * |x - 1/2|^beta), whose smoothness is
    exactly beta (rejected for even integer beta, where the kink vanishes).
    """

    kind: str
    beta_nominal: float = 1.0
    amplitude: float = 1.0
    hold_scale: float = 1.0
    theta: tuple[float, ...] | None = None
    q: int = 4
    K: int = 10
    max_log_ratio: float = 8.0


def _cos_shape(x, a):
    return a * np.cos(2.0 * np.pi * np.asarray(x, dtype=float))


def _holder_shape(x, beta, b):
    return b * np.abs(np.asarray(x, dtype=float) - 0.5) ** beta


def _graded_breakpoints(center: float = 0.5, levels: int = 45) -> np.ndarray:
    """Panels geometrically refined toward a kink, uniform elsewhere."""
    offsets = 2.0 ** -np.arange(1, levels + 1)
    pts = np.concatenate([[0.0, 1.0], np.linspace(0.0, 1.0, 9),
                          center - offsets, center + offsets, [center]])
    pts = pts[(pts >= 0.0) & (pts <= 1.0)]
    return np.unique(pts)


def make_truth(spec: TruthSpec) -> Density:
    """Construct and normalize the configured truth density."""
    if spec.kind == "in_model":
        basis = build_basis(spec.q, spec.K)
        if spec.theta is None:
            values = np.zeros(basis.dimension)
        else:
            values = np.asarray(spec.theta, dtype=float)
            if values.size != basis.dimension:
                raise ValueError(
                    f"in-model truth needs {basis.dimension} coefficients")
            values = values - values.mean()
        density: Density = LogSplineDensity(basis, Theta(values))
    elif spec.kind == "smooth_analytic":
        density = AnalyticDensity(partial(_cos_shape, a=spec.amplitude),
                                  np.linspace(0.0, 1.0, 17))
    elif spec.kind == "holder":
        beta = spec.beta_nominal
        if beta <= 0:
            raise ValueError("holder smoothness must be positive")
        if beta == 2.0 * round(beta / 2.0):
            raise ValueError(
                f"holder construction degenerates for even integer beta={beta} "
                "(|x - 1/2|^beta is a polynomial there)")
        density = AnalyticDensity(
            partial(_holder_shape, beta=beta, b=spec.hold_scale),
            _graded_breakpoints())
    else:
        raise ValueError(f"unknown truth kind {spec.kind!r}")
    grid = np.linspace(0.0, 1.0, 4097)
    log_vals = density.log_pdf(grid)
    spread = float(log_vals.max() - log_vals.min())
    if spread > spec.max_log_ratio:
        raise ValueError(
            f"truth density violates the boundedness contract: "
            f"log sup/inf ratio {spread:.3g} > {spec.max_log_ratio}")
    return density


@dataclass(frozen=True)
class IndexPartition:
    """Rate-based partition of the model indices for a target beta."""

    I1: tuple[float, ...]
    I2: tuple[float, ...]
    I3: tuple[float, ...]

    @property
    def band(self) -> tuple[float, ...]:
        return tuple(g for g in self.I1 if g not in self.I3)


def classify_indices(models, beta: float, H: float = 1.0) -> IndexPartition:
    """Split indices by rate comparison against the beta model.

    I1 collects indices at least as fast as sqrt(H) times the target rate,
    I2 the rest, I3 the strictly-faster-than-needed indices; the correct-rate
    band is I1 minus I3 and always contains beta itself.
    """
    if H < 1.0:
        raise ValueError("H must be at least 1")
    eps = {spec.gamma: spec.eps for spec in models}
    if beta not in eps:
        raise ValueError(f"beta={beta} is not among the model indices")
    root_h = math.sqrt(H)
    eps_beta = eps[beta]
    i1 = tuple(g for g, e in eps.items() if e <= root_h * eps_beta)
    i2 = tuple(g for g, e in eps.items() if e > root_h * eps_beta)
    i3 = tuple(g for g, e in eps.items() if root_h * e < eps_beta)
    return IndexPartition(i1, i2, i3)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float


def _ols(x: np.ndarray, y: np.ndarray) -> SlopeFit:
    m = x.size
    sxx = float(np.sum((x - x.mean()) ** 2))
    if sxx == 0.0:
        raise ValueError("slope is undefined when all abscissas coincide")
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = max(m - 2, 1)
    stderr = math.sqrt(float(np.sum(resid ** 2)) / dof / sxx)
    return SlopeFit(slope, intercept, stderr)


def fit_log_slope(points) -> SlopeFit:
    """OLS of log(value) on log(n); needs >= 3 points with positive values."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("slope fit needs at least 3 points")
    n = np.array([p[0] for p in pts], dtype=float)
    v = np.array([p[1] for p in pts], dtype=float)
    if np.any(v <= 0):
        raise ValueError("slope fit needs positive values")
    return _ols(np.log(n), np.log(v))


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values)
    v = values[order]
    w = weights[order]
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return float(v[min(idx, v.size - 1)])


@dataclass(frozen=True)
class CellResult:
    """One (n, replication) grid cell of an adaptive-posterior experiment."""

    n: int
    replication: int
    cell_seed: int
    gammas: tuple[float, ...]
    index_probs: tuple[float, ...]
    log_weights: tuple[float, ...]
    log_marginals: tuple[float, ...]
    log_marginal_ses: tuple[float, ...]
    acceptance_rates: tuple[float, ...]
    model_hellinger_median: tuple[float, ...]
    model_l2_median: tuple[float, ...]
    mixture_hellinger_median: float
    mixture_l2_median: float


def cell_seed_value(master_seed: int, n: int, replication: int) -> int:
    ss = np.random.SeedSequence((master_seed, n, replication))
    return int(ss.generate_state(1, np.uint64)[0])


def _cell_rng(master_seed: int, n: int, replication: int, stream: int):
    return np.random.default_rng(
        np.random.SeedSequence((master_seed, n, replication, stream)))


def _model_weights(config) -> np.ndarray:
    if config.weights is None:
        return np.full(len(config.indices), 1.0 / len(config.indices))
    return np.asarray(config.weights, dtype=float)


def run_grid_cell(config, n: int, replication: int,
                  with_distances: bool = True) -> CellResult:
    """Data draw, per-model posterior and index posterior for one cell."""
    truth = make_truth(config.truth)
    data = truth.sample(n, _cell_rng(config.master_seed, n, replication, 0))
    weights = _model_weights(config)
    lms, ses, accs = [], [], []
    draw_sets, specs = [], []
    for k, gamma in enumerate(config.indices):
        spec = make_model_spec(gamma, n, config.q, config.box_bound,
                               config.knot_scale, config.log_factor)
        rng = _cell_rng(config.master_seed, n, replication, k + 1)
        try:
            map_theta = map_estimate(spec, data)
            draws, acc = posterior_sample(spec, data, config.mcmc_draws, rng,
                                          start=map_theta.values)
            lm, se = log_marginal(spec, data, config.is_samples, rng,
                                  map_theta=map_theta, pilot_draws=draws)
        except Exception as e:
            raise InferenceError(
                f"cell n={n} replication={replication} gamma={gamma}: {e}") from e
        specs.append(spec)
        draw_sets.append(draws)
        lms.append(lm)
        ses.append(se)
        accs.append(acc)
    post = aggregate_index_posterior(config.indices, weights, lms, ses)

    hell_med, l2_med = [], []
    mix_h, mix_l2 = math.nan, math.nan
    if with_distances:
        pooled_h, pooled_l2, pooled_w = [], [], []
        for spec, draws, prob in zip(specs, draw_sets, post.probabilities):
            d = batch_distances(truth, spec.basis, draws, kinds=("hellinger", "l2"))
            hell_med.append(float(np.median(d["hellinger"])))
            l2_med.append(float(np.median(d["l2"])))
            pooled_h.append(d["hellinger"])
            pooled_l2.append(d["l2"])
            pooled_w.append(np.full(draws.shape[0], prob / draws.shape[0]))
        w = np.concatenate(pooled_w)
        mix_h = _weighted_median(np.concatenate(pooled_h), w)
        mix_l2 = _weighted_median(np.concatenate(pooled_l2), w)
    return CellResult(
        n=n, replication=replication,
        cell_seed=cell_seed_value(config.master_seed, n, replication),
        gammas=tuple(config.indices),
        index_probs=tuple(float(p) for p in post.probabilities),
        log_weights=tuple(float(v) for v in post.log_weights),
        log_marginals=tuple(lms), log_marginal_ses=tuple(ses),
        acceptance_rates=tuple(accs),
        model_hellinger_median=tuple(hell_med), model_l2_median=tuple(l2_med),
        mixture_hellinger_median=mix_h, mixture_l2_median=mix_l2)


def run_adaptive_grid(config, with_distances: bool = True) -> list[CellResult]:
    """All cells of the (n, replication) grid, optionally in parallel.

    Results are ordered by grid position regardless of worker count.
    """
    jobs = [(n, rep) for n in config.n_grid for rep in range(config.replications)]
    if config.threads > 1:
        worker = partial(_grid_worker, config, with_distances)
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(worker, jobs, chunksize=1))
    return [run_grid_cell(config, n, rep, with_distances) for n, rep in jobs]


def _grid_worker(config, with_distances, job):
    n, rep = job
    return run_grid_cell(config, n, rep, with_distances)


@dataclass(frozen=True)
class RateResult:
    cells: tuple[CellResult, ...]
    hellinger_fit: SlopeFit
    l2_fit: SlopeFit
    slope_target: float
    slope_tol: float
    passed: bool
    master_seed: int


def rate_from_cells(cells, config) -> RateResult:
    beta = config.truth.beta_nominal
    target = -beta / (2.0 * beta + 1.0)
    fit_h = fit_log_slope([(c.n, c.mixture_hellinger_median) for c in cells])
    fit_l2 = fit_log_slope([(c.n, c.mixture_l2_median) for c in cells])
    tol = config.thresholds.slope_tol
    return RateResult(tuple(cells), fit_h, fit_l2, target, tol,
                      abs(fit_h.slope - target) <= tol, config.master_seed)


def rate_experiment(config) -> RateResult:
    """Posterior-distance decay across the n grid, slope-checked."""
    return rate_from_cells(run_adaptive_grid(config), config)


@dataclass(frozen=True)
class SelectionResult:
    cells: tuple[CellResult, ...]
    band_by_n: tuple[tuple[int, tuple[float, ...]], ...]
    band_mass: tuple[tuple[int, int, float], ...]  # (n, replication, mass)
    fraction_at_max: float
    mass_threshold: float
    fraction_threshold: float
    passed: bool
    master_seed: int


def selection_from_cells(cells, config) -> SelectionResult:
    beta = config.truth.beta_nominal
    h = config.thresholds.band_H
    bands: dict[int, tuple[float, ...]] = {}
    for n in config.n_grid:
        specs = [make_model_spec(g, n, config.q, config.box_bound,
                                 config.knot_scale, config.log_factor)
                 for g in config.indices]
        bands[n] = classify_indices(specs, beta, h).band
    rows = []
    for cell in cells:
        band = bands[cell.n]
        mass = sum(p for g, p in zip(cell.gammas, cell.index_probs) if g in band)
        rows.append((cell.n, cell.replication, float(mass)))
    n_max = max(config.n_grid)
    at_max = [m for (n, _, m) in rows if n == n_max]
    fraction = sum(m > config.thresholds.band_mass for m in at_max) / len(at_max)
    return SelectionResult(
        tuple(cells), tuple(sorted(bands.items())), tuple(rows), fraction,
        config.thresholds.band_mass, config.thresholds.band_fraction,
        fraction >= config.thresholds.band_fraction, config.master_seed)


def selection_experiment(config) -> SelectionResult:
    """Index-posterior mass on the correct-rate band across the grid."""
    return selection_from_cells(run_adaptive_grid(config), config)


@dataclass(frozen=True)
class BFResult:
    rows: tuple[tuple[int, int, int, float], ...]  # (n, replication, seed, log BF)
    rep_slopes: tuple[float, ...]
    expected_direction: str
    match_fraction: float
    fraction_threshold: float
    passed: bool
    master_seed: int


def bf_experiment(config) -> BFResult:
    """Sign of the Bayes-factor drift across the n grid, per replication."""
    if len(config.indices) != 2:
        raise ValueError("the Bayes-factor experiment needs exactly two models")
    if config.expected_direction not in ("up", "down"):
        raise ValueError("expected_direction must be 'up' or 'down'")
    cells = run_adaptive_grid(config, with_distances=False)
    rows = tuple((c.n, c.replication, c.cell_seed,
                  float(c.log_weights[1] - c.log_weights[0])) for c in cells)
    slopes = []
    for rep in range(config.replications):
        pts = [(n, lbf) for (n, r, _, lbf) in rows if r == rep]
        x = np.array([p[0] for p in pts], dtype=float)
        y = np.array([p[1] for p in pts], dtype=float)
        slopes.append(_ols(x, y).slope)
    want_up = config.expected_direction == "up"
    matches = sum((s > 0) == want_up for s in slopes)
    fraction = matches / len(slopes)
    return BFResult(rows, tuple(slopes), config.expected_direction, fraction,
                    config.thresholds.direction_fraction,
                    fraction >= config.thresholds.direction_fraction,
                    config.master_seed)
