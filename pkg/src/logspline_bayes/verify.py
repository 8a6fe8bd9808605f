"""Self-contained property suite behind the `verify` subcommand.

Each check returns silently on success and raises AssertionError with a
diagnostic on failure; the runner prints one line per check and reports
overall success. This is a fast spot check, not a replacement for the full
pytest suite.
"""
from __future__ import annotations

import math

import numpy as np

from .density import (LogSplineDensity, PiecewiseConstantDensity, Theta,
                      grad_log_norm, log_norm_const, project_sum_zero)
from .entropy import (DiscreteFamily, covering_number, hausdorff_alpha_entropy,
                      renyi_integral, walker_predictive)
from .harness import RateBoundConstants, classify_indices, fit_log_slope, r_min_constant
from .inference import map_estimate
from .metrics import hellinger, l2_distance
from .priors import make_fixed_spec, make_model_spec
from .splines import build_basis


def _check_partition_of_unity():
    grid = np.linspace(0.0, 1.0, 2001)
    for q in range(1, 5):
        for K in (1, 7, 50):
            design = build_basis(q, K).design_matrix(grid)
            err = np.abs(design.sum(axis=1) - 1.0).max()
            assert err <= 1e-10, f"partition of unity off by {err:.2e} (q={q}, K={K})"
            assert design.min() >= -1e-14, f"negative basis value (q={q}, K={K})"


def _check_normalizer_closed_form():
    basis = build_basis(1, 2)
    for t in (0.5, 1.0, 2.0):
        c = log_norm_const(basis, Theta(np.array([t, -t])))
        want = math.log(math.cosh(t))
        assert abs(c - want) <= 1e-10, f"log-normalizer off at t={t}: {c} vs {want}"
        g = grad_log_norm(basis, Theta(np.array([t, -t])))
        sig = 1.0 / (1.0 + math.exp(-2.0 * t))
        assert abs(g[0] - sig) <= 1e-10, f"mean map off at t={t}"


def _check_normalization_random():
    rng = np.random.default_rng(7)
    basis = build_basis(4, 10)
    for _ in range(20):
        v = rng.uniform(-2.0, 2.0, basis.dimension)
        d = LogSplineDensity(basis, project_sum_zero(v))
        err = abs(d.integral(40) - 1.0)
        assert err <= 1e-9, f"normalization off by {err:.2e}"


def _check_gradient_fd():
    rng = np.random.default_rng(11)
    basis = build_basis(3, 5)
    from .density import log_norm_values
    for _ in range(10):
        theta = project_sum_zero(rng.uniform(-1.5, 1.5, basis.dimension))
        g = grad_log_norm(basis, theta)
        for j in range(basis.dimension):
            e = np.zeros(basis.dimension)
            e[j] = 1e-5
            fd = (float(log_norm_values(basis, theta.values + e))
                  - float(log_norm_values(basis, theta.values - e))) / 2e-5
            assert abs(fd - g[j]) <= 1e-6 * max(1.0, abs(g[j])), \
                f"gradient mismatch at j={j}: {fd} vs {g[j]}"


def _check_metric_closed_forms():
    from .density import AnalyticDensity
    u = PiecewiseConstantDensity(np.array([0.0, 1.0]), np.array([1.0]))
    graded = np.unique(np.concatenate([[0.0, 1.0], 2.0 ** -np.arange(1, 46)]))
    ramp = AnalyticDensity(lambda x: np.log(2.0 * np.maximum(x, 1e-300)), graded)
    h = hellinger(u, ramp)
    want = math.sqrt(2.0 - 4.0 * math.sqrt(2.0) / 3.0)
    assert abs(h - want) <= 1e-9, f"Hellinger closed form off: {h} vs {want}"
    assert h == hellinger(ramp, u), "Hellinger asymmetric"
    l2 = l2_distance(u, ramp)
    assert abs(l2 - 1.0 / math.sqrt(3.0)) <= 1e-9, "L2 closed form off"
    ramp2 = LogSplineDensity(build_basis(2, 1), Theta(np.array([-2.0, 2.0])))
    assert l2_distance(ramp2, ramp2) == 0.0, "nonzero self distance"


def _check_map_closed_form():
    spec = make_fixed_spec(q=1, K=2, M=5.0, n=4)
    data = np.array([0.1, 0.2, 0.3, 0.7])
    theta = map_estimate(spec, data)
    assert abs(theta.values[0] - math.atanh(0.5)) <= 1e-8, "MAP off closed form"
    clipped = map_estimate(make_fixed_spec(q=1, K=2, M=0.25, n=4), data)
    assert abs(clipped.values[0] - 0.25) <= 1e-10, "box clipping failed"


def _two_step(a: float) -> PiecewiseConstantDensity:
    return PiecewiseConstantDensity(np.array([0.0, 0.5, 1.0]), np.array([a, 1.0 - a]))


def _check_entropy_suite():
    rng = np.random.default_rng(3)
    for _ in range(5):
        m = int(rng.integers(2, 7))
        members = [_two_step(float(a)) for a in rng.uniform(0.05, 0.95, m)]
        masses = rng.uniform(0.2, 1.0, m)
        masses /= masses.sum() * float(rng.uniform(1.0, 1.5))
        fam = DiscreteFamily(members, masses, members[0])
        for delta in (0.05, 0.2, 0.6):
            n_cov = covering_number(fam, delta)
            total = fam.total_mass()
            for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
                j = hausdorff_alpha_entropy(fam, delta, alpha)
                bound = alpha * math.log(total) + (1 - alpha) * math.log(n_cov)
                assert j <= bound + 1e-12, "entropy sandwich violated"
                assert bound <= math.log(n_cov) + 1e-12, "sandwich upper arm violated"
            assert math.isclose(math.exp(hausdorff_alpha_entropy(fam, delta, 0.0)),
                                n_cov), "alpha=0 endpoint mismatch"
    two = DiscreteFamily([_two_step(0.125), _two_step(0.875)],
                         np.array([0.5, 0.5]), _two_step(0.125))
    j = hausdorff_alpha_entropy(two, 0.3, 0.5)
    assert abs(j - 0.5 * math.log(2.0)) <= 1e-12, "worked entropy example failed"


def _check_walker_telescoping():
    rng = np.random.default_rng(5)
    for _ in range(3):
        m = int(rng.integers(2, 5))
        members = [_two_step(float(a)) for a in rng.uniform(0.1, 0.9, m)]
        masses = rng.dirichlet(np.ones(m)) * 0.9
        fam = DiscreteFamily(members, masses, members[0])
        data = rng.uniform(0.0, 1.0, 6)
        subset = list(range(m))
        direct = [math.log(fam.masses[j]) + float(np.sum(members[j].log_pdf(data)))
                  for j in subset]
        mx = max(direct)
        lhs = mx + math.log(sum(math.exp(v - mx) for v in direct))
        rhs = math.log(fam.masses[subset].sum())
        for k in range(data.size):
            pred = walker_predictive(fam, subset, data[:k])
            rhs += float(pred.log_pdf(np.array([data[k]]))[0])
        assert abs(lhs - rhs) <= 1e-9, f"telescoping identity off by {abs(lhs - rhs):.2e}"


def _check_renyi_closed_form():
    f = _two_step(0.8)
    u = PiecewiseConstantDensity(np.array([0.0, 1.0]), np.array([1.0]))
    rho = renyi_integral(f, u, 0.5)
    want = (math.sqrt(1.6) + math.sqrt(0.4)) / 2.0
    assert abs(rho - want) <= 1e-12, "Renyi closed form failed"


def _check_constant_calculator():
    c = RateBoundConstants(c=1.0, j=1.0, g=0.0, l=2.0, alpha=1.0 / 38.0, h=1.0)
    assert c.standing_assumption_ok, "standing assumption should hold"
    val = r_min_constant(c, "base")
    assert abs(val - 1460.0) <= 1e-9, f"constant calculator gave {val}"
    rng = np.random.default_rng(13)
    for _ in range(25):
        alpha = float(rng.uniform(0.001, 0.05))
        l = float(rng.uniform(0.1, (1 - alpha) / (18 * alpha) * 0.9))
        cc = RateBoundConstants(c=float(rng.uniform(0.1, 3)), j=float(rng.uniform(0, 3)),
                                g=float(rng.uniform(0, 3)), l=l, alpha=alpha,
                                h=float(rng.uniform(1, 4)), k=1.0)
        assert r_min_constant(cc, "refined") == r_min_constant(cc, "base"), \
            "variants must agree at k=1"


def _check_classifier():
    specs = [make_model_spec(g, 1000, 4, 2.0) for g in (1.0, 2.0)]
    part = classify_indices(specs, beta=1.0, H=4.0)
    assert part.band == (1.0, 2.0), "worked classification example failed"
    part2 = classify_indices(specs, beta=2.0, H=1.0)
    assert part2.I2 == (1.0,), "slow index must land in I2"


def _check_slope_fit():
    ns = [10, 100, 1000, 10000]
    fit = fit_log_slope([(n, n ** (-1.0 / 3.0)) for n in ns])
    assert abs(fit.slope + 1.0 / 3.0) <= 1e-12, "exact slope recovery failed"


CHECKS = [
    ("spline partition of unity", _check_partition_of_unity),
    ("normalizer closed forms", _check_normalizer_closed_form),
    ("random-theta normalization", _check_normalization_random),
    ("mean-map finite differences", _check_gradient_fd),
    ("metric basic identities", _check_metric_closed_forms),
    ("MAP closed form and clipping", _check_map_closed_form),
    ("entropy sandwich and endpoints", _check_entropy_suite),
    ("predictive telescoping", _check_walker_telescoping),
    ("Renyi closed form", _check_renyi_closed_form),
    ("radius bound calculator", _check_constant_calculator),
    ("index classification", _check_classifier),
    ("log-log slope fit", _check_slope_fit),
]


def run_all(echo=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            fn()
        except AssertionError as e:
            ok = False
            echo(f"FAIL {name}: {e}")
        else:
            echo(f"PASS {name}")
    return ok
