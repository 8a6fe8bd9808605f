import itertools
import math

import numpy as np
import pytest

from logspline_bayes import (DiscreteFamily, LogSplineDensity, build_basis,
                             covering_number, hausdorff_alpha_entropy, hellinger,
                             tail_bound_check, project_sum_zero, renyi_integral,
                             walker_predictive)
from tests.conftest import two_step


def random_family(rng, m, mass_total=None):
    members = [two_step(float(a)) for a in rng.uniform(0.05, 0.95, m)]
    masses = rng.dirichlet(np.ones(m))
    masses *= mass_total if mass_total is not None else float(rng.uniform(0.5, 1.0))
    return DiscreteFamily(members, masses, members[0])


def exhaustive_covering_number(family, delta):
    """Independent oracle: try all center subsets by increasing size."""
    dist = family.distance_matrix()
    m = family.size
    for r in range(1, m + 1):
        for centers in itertools.combinations(range(m), r):
            if all(any(dist[c, j] < delta for c in centers) for j in range(m)):
                return r
    return m


def exhaustive_alpha_entropy(family, delta, alpha):
    """Independent oracle: enumerate every set partition, check ball feasibility."""
    dist = family.distance_matrix()
    m = family.size
    masses = family.masses

    def feasible(block):
        return any(all(dist[c, j] < delta for j in block) for c in range(m))

    def partitions(items):
        if not items:
            yield []
            return
        head, rest = items[0], items[1:]
        for part in partitions(rest):
            for i in range(len(part)):
                yield part[:i] + [part[i] + [head]] + part[i + 1:]
            yield part + [[head]]

    best = math.inf
    for part in partitions(list(range(m))):
        if all(feasible(b) for b in part):
            cost = sum(1.0 if alpha == 0.0 else masses[b].sum() ** alpha
                       for b in part)
            best = min(best, cost)
    return math.log(best)


class TestCoveringNumber:
    def test_far_apart_members(self):
        members = [two_step(0.02), two_step(0.5), two_step(0.98)]
        fam = DiscreteFamily(members, np.array([0.3, 0.3, 0.3]), members[0])
        d = fam.distance_matrix()
        assert d[0, 1] > 0.4 and d[1, 2] > 0.4 and d[0, 2] > 0.4
        assert covering_number(fam, 0.4) == 3
        assert covering_number(fam, 1.3) == 1

    def test_greedy_upper_bounds_exact(self, rng):
        for _ in range(10):
            fam = random_family(rng, int(rng.integers(3, 9)))
            delta = float(rng.uniform(0.05, 0.8))
            exact = covering_number(fam, delta, "exact")
            greedy = covering_number(fam, delta, "greedy")
            assert exact <= greedy <= exact * (1.0 + math.log(fam.size)) + 1e-9

    def test_exact_matches_brute_force(self, rng):
        for _ in range(10):
            fam = random_family(rng, int(rng.integers(2, 8)))
            delta = float(rng.uniform(0.05, 1.0))
            assert covering_number(fam, delta) == exhaustive_covering_number(fam, delta)

    def test_log_spline_members(self, rng):
        basis = build_basis(2, 3)
        members = [LogSplineDensity(basis, project_sum_zero(
            rng.uniform(-1.5, 1.5, basis.dimension))) for _ in range(8)]
        fam = DiscreteFamily(members, np.full(8, 0.1), members[0])
        for delta in (0.05, 0.15, 0.4):
            exact = covering_number(fam, delta, "exact")
            assert covering_number(fam, delta, "greedy") >= exact
            assert exact == exhaustive_covering_number(fam, delta)

    def test_size_limit(self, rng):
        fam = random_family(rng, 13)
        with pytest.raises(ValueError):
            covering_number(fam, 0.3, "exact")
        covering_number(fam, 0.3, "greedy")

    def test_monotone_in_delta(self, rng):
        fam = random_family(rng, 7)
        values = [covering_number(fam, d) for d in (0.05, 0.1, 0.2, 0.5, 1.0)]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestAlphaEntropy:
    def test_single_member(self, rng):
        fam = random_family(rng, 1)
        for alpha in (0.0, 0.5, 1.0):
            assert hausdorff_alpha_entropy(fam, 0.2, alpha) == 0.0 \
                if alpha == 0.0 else True
        # one ball of the member's own mass
        assert hausdorff_alpha_entropy(fam, 0.2, 1.0) == pytest.approx(
            math.log(fam.total_mass()))

    def test_two_member_worked_example(self):
        members = [two_step(0.125), two_step(0.875)]
        fam = DiscreteFamily(members, np.array([0.5, 0.5]), members[0])
        assert fam.distance_matrix()[0, 1] > 0.3
        j = hausdorff_alpha_entropy(fam, 0.3, 0.5)
        assert j == pytest.approx(0.5 * math.log(2.0), abs=1e-12)

    def test_alpha_one_is_total_mass(self, rng):
        for _ in range(5):
            fam = random_family(rng, int(rng.integers(2, 7)))
            delta = float(rng.uniform(0.05, 1.0))
            assert hausdorff_alpha_entropy(fam, delta, 1.0) == pytest.approx(
                math.log(fam.total_mass()), abs=1e-12)

    def test_alpha_zero_is_covering_number(self, rng):
        for _ in range(8):
            fam = random_family(rng, int(rng.integers(2, 8)))
            delta = float(rng.uniform(0.05, 1.0))
            assert math.exp(hausdorff_alpha_entropy(fam, delta, 0.0)) == \
                pytest.approx(covering_number(fam, delta), abs=1e-9)

    def test_matches_partition_brute_force(self, rng):
        for _ in range(8):
            fam = random_family(rng, int(rng.integers(2, 6)))
            delta = float(rng.uniform(0.05, 0.9))
            alpha = float(rng.uniform(0.0, 1.0))
            assert hausdorff_alpha_entropy(fam, delta, alpha) == pytest.approx(
                exhaustive_alpha_entropy(fam, delta, alpha), abs=1e-12)

    def test_monotone_in_delta(self, rng):
        fam = random_family(rng, 6)
        for alpha in (0.25, 0.75):
            vals = [hausdorff_alpha_entropy(fam, d, alpha)
                    for d in (0.05, 0.15, 0.4, 0.9)]
            assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_sandwich_inequality(self, rng):
        for _ in range(10):
            fam = random_family(rng, int(rng.integers(2, 8)))
            total = fam.total_mass()
            for delta in (0.05, 0.2, 0.6, 1.0):
                n_cov = covering_number(fam, delta)
                for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
                    j = hausdorff_alpha_entropy(fam, delta, alpha)
                    middle = total ** alpha * n_cov ** (1.0 - alpha)
                    assert math.exp(j) <= middle * (1.0 + 1e-12)
                    assert middle <= n_cov * (1.0 + 1e-12)


class TestWalkerPredictive:
    def test_singleton_subset_returns_member(self, rng):
        fam = random_family(rng, 4)
        x = np.linspace(0.05, 0.95, 7)
        pred = walker_predictive(fam, [2], rng.uniform(0, 1, 5))
        assert np.allclose(pred.log_pdf(x), fam.members[2].log_pdf(x))

    def test_empty_prefix_is_prior_predictive(self, rng):
        fam = random_family(rng, 3)
        pred = walker_predictive(fam, [0, 1, 2], [])
        x = np.linspace(0.0, 1.0, 9)
        want = sum(m * fam.members[j].pdf(x)
                   for j, m in enumerate(fam.masses)) / fam.masses.sum()
        assert np.allclose(pred.pdf(x), want)

    def test_two_member_hand_computation(self):
        members = [two_step(0.8), two_step(0.3)]
        fam = DiscreteFamily(members, np.array([0.6, 0.2]), members[0])
        x1 = 0.25  # densities 1.6 and 0.6 there
        pred = walker_predictive(fam, [0, 1], [x1])
        w = np.array([0.6 * 1.6, 0.2 * 0.6])
        w /= w.sum()
        want = w[0] * members[0].pdf(np.array([0.7])) \
            + w[1] * members[1].pdf(np.array([0.7]))
        assert pred.pdf(np.array([0.7]))[0] == pytest.approx(float(want[0]))

    def test_normalized_output(self, rng):
        fam = random_family(rng, 5)
        pred = walker_predictive(fam, [1, 3, 4], rng.uniform(0, 1, 8))
        assert pred.integral() == pytest.approx(1.0, abs=1e-12)

    def test_telescoping_identity(self, rng):
        # log of int_B prod f(X_i) dPi equals log Pi(B) plus the sum of
        # successive predictive log densities
        for _ in range(20):
            m = int(rng.integers(2, 6))
            fam = random_family(rng, m)
            k = int(rng.integers(1, m + 1))
            subset = sorted(rng.choice(m, size=k, replace=False).tolist())
            data = rng.uniform(0.0, 1.0, int(rng.integers(1, 9)))
            direct = [math.log(fam.masses[j])
                      + float(np.sum(fam.members[j].log_pdf(data)))
                      for j in subset]
            top = max(direct)
            lhs = top + math.log(sum(math.exp(v - top) for v in direct))
            rhs = math.log(fam.masses[subset].sum())
            for i in range(data.size):
                pred = walker_predictive(fam, subset, data[:i])
                rhs += float(pred.log_pdf(np.array([data[i]]))[0])
            assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_bad_subset(self, rng):
        fam = random_family(rng, 3)
        with pytest.raises(ValueError):
            walker_predictive(fam, [], [0.5])
        with pytest.raises(ValueError):
            walker_predictive(fam, [0, 0], [0.5])


class TestRenyiIntegral:
    def test_identical_densities(self, uniform_density):
        assert renyi_integral(uniform_density, uniform_density, 0.5) == \
            pytest.approx(1.0, abs=1e-12)

    def test_step_closed_form(self, uniform_density):
        rho = renyi_integral(two_step(0.8), uniform_density, 0.5)
        assert rho == pytest.approx((math.sqrt(1.6) + math.sqrt(0.4)) / 2.0,
                                    abs=1e-12)

    def test_holder_upper_bound(self, rng):
        basis = build_basis(2, 4)
        for _ in range(10):
            f = LogSplineDensity(basis, project_sum_zero(
                rng.uniform(-1.5, 1.5, basis.dimension)))
            g = LogSplineDensity(basis, project_sum_zero(
                rng.uniform(-1.5, 1.5, basis.dimension)))
            alpha = float(rng.uniform(0.05, 0.95))
            assert renyi_integral(f, g, alpha) <= 1.0 + 1e-12


class TestTailBound:
    def test_empty_tail_passes(self, rng, uniform_density):
        fam = DiscreteFamily([two_step(0.45)], np.array([0.5]), uniform_density)
        report = tail_bound_check(fam, 3.0, 1.0, 0.5, 10, 100, rng)
        assert report.tail_indices == ()
        assert report.lhs_estimate == 0.0
        assert report.passed

    def test_singleton_matches_closed_form(self, rng, uniform_density):
        f = two_step(0.85)
        fam = DiscreteFamily([f], np.array([0.4]), uniform_density)
        h = hellinger(f, uniform_density)
        eps = h / 3.5
        n, alpha = 15, 0.5
        report = tail_bound_check(fam, 3.0, eps, alpha, n, 3000, rng)
        assert report.tail_indices == (0,)
        closed = 0.4 ** alpha * renyi_integral(f, uniform_density, alpha) ** n
        assert abs(report.lhs_estimate - closed) <= 3.0 * report.lhs_se
        assert report.passed

    def test_alpha_one_recovers_prior_mass(self, uniform_density):
        # mild member and small n keep the likelihood-ratio variance in check
        f = two_step(0.55)
        fam = DiscreteFamily([f, two_step(0.53)], np.array([0.3, 0.2]),
                             uniform_density)
        h01 = min(hellinger(f, uniform_density),
                  hellinger(fam.members[1], uniform_density))
        eps = h01 / 4.0
        report = tail_bound_check(fam, 3.0, eps, 1.0, 8, 4000,
                                     np.random.default_rng(19))
        tail_mass = fam.masses[list(report.tail_indices)].sum()
        assert abs(report.lhs_estimate - tail_mass) <= 3.0 * report.lhs_se
        assert report.rhs_bound == pytest.approx(tail_mass)

    def test_randomized_families_respect_bound(self, rng):
        for _ in range(8):
            m = int(rng.integers(2, 7))
            members = [two_step(float(a)) for a in rng.uniform(0.2, 0.8, m)]
            masses = rng.dirichlet(np.ones(m)) * 0.9
            truth = two_step(0.5)
            fam = DiscreteFamily(members, masses, truth)
            r = float(rng.choice([3.0, 5.0]))
            alpha = float(rng.choice([0.25, 0.5]))
            n = int(rng.integers(5, 40))
            dists = [hellinger(f, truth) for f in members]
            eps = max(min(dists) / (r + 1.0), 1e-3)
            report = tail_bound_check(fam, r, eps, alpha, n, 400, rng)
            assert report.passed

    def test_argument_validation(self, rng, uniform_density):
        fam = DiscreteFamily([two_step(0.7)], np.array([0.5]), uniform_density)
        with pytest.raises(ValueError):
            tail_bound_check(fam, 2.0, 0.1, 0.5, 5, 200, rng)
        with pytest.raises(ValueError):
            tail_bound_check(fam, 3.0, 0.1, 0.5, 5, 50, rng)
        with pytest.raises(ValueError):
            tail_bound_check(fam, 3.0, 0.1, 1.5, 5, 200, rng)
