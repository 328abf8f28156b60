import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from statfrob.errors import (
    DimensionMismatch,
    InvalidProbability,
    NonFinite,
    RankDeficient,
    SingularMetric,
)
from statfrob.expfam import (
    MetricTensor,
    bernoulli,
    bregman_divergence,
    build_family,
    categorical,
    density,
    dual_basis,
    dual_potential,
    expectation_params,
    fisher_metric,
    kl_divergence,
    log_partition,
    natural_from_density,
    natural_from_expectation,
    random_family,
    saturate,
    score_matrix,
    skewness_tensor,
)

from .strategies import family_and_beta, interior_probability

LN3 = math.log(3.0)


def enumerate_moments(stats, beta):
    """Plain-loop oracle: density, mean, covariance and third central moment."""
    stats = np.asarray(stats, dtype=float)
    n, m = stats.shape
    weights = [math.exp(-sum(beta[i] * stats[i, w] for i in range(n))) for w in range(m)]
    z = sum(weights)
    p = [wt / z for wt in weights]
    mean = [sum(p[w] * stats[i, w] for w in range(m)) for i in range(n)]
    dev = [[stats[i, w] - mean[i] for w in range(m)] for i in range(n)]
    cov = np.array([[sum(p[w] * dev[i][w] * dev[j][w] for w in range(m))
                     for j in range(n)] for i in range(n)])
    # scores are -dev, so the third moment flips sign
    third = np.array([[[-sum(p[w] * dev[i][w] * dev[j][w] * dev[k][w] for w in range(m))
                        for k in range(n)] for j in range(n)] for i in range(n)])
    return np.array(p), np.array(mean), cov, third, math.log(z)


class TestConstruction:
    def test_bernoulli_and_categorical_shapes(self):
        assert bernoulli().n == 1 and bernoulli().omega_size == 2
        fam = categorical(3)
        assert fam.n == 2 and fam.omega_size == 3
        np.testing.assert_array_equal(fam.stats, [[0, 1, 0], [0, 0, 1]])

    def test_constant_row_is_rank_deficient(self):
        with pytest.raises(RankDeficient):
            build_family(2, [[1, 1]])

    def test_too_many_rows(self):
        with pytest.raises(RankDeficient):
            build_family(3, [[0, 1, 0], [0, 0, 1], [1, 0, 0]])

    def test_dependent_rows(self):
        with pytest.raises(RankDeficient):
            build_family(4, [[0, 1, 2, 3], [0, 2, 4, 6]])

    def test_column_count_checked(self):
        with pytest.raises(DimensionMismatch):
            build_family(3, [[0, 1]])

    def test_nonfinite_stats(self):
        with pytest.raises(NonFinite):
            build_family(2, [[0, np.inf]])

    def test_stats_are_read_only(self):
        fam = categorical(3)
        with pytest.raises(ValueError):
            fam.stats[0, 0] = 5.0

    def test_equality_and_hash(self):
        assert categorical(4) == categorical(4)
        assert hash(categorical(4)) == hash(categorical(4))
        assert categorical(4) != categorical(3)

    def test_random_family_bounds(self, rng):
        for _ in range(50):
            fam = random_family(rng)
            assert 2 <= fam.omega_size <= 6
            assert 1 <= fam.n <= min(3, fam.omega_size - 1)
            assert np.all(np.abs(fam.stats) <= 1.0)


class TestPotentialAndDensity:
    @pytest.mark.parametrize("fam,beta,expected", [
        (bernoulli(), [0.0], math.log(2)),
        (categorical(3), [0.0, 0.0], math.log(3)),
        (bernoulli(), [LN3], math.log(4 / 3)),
    ])
    def test_log_partition_values(self, fam, beta, expected):
        assert log_partition(fam, beta) == pytest.approx(expected, abs=1e-15)

    def test_log_partition_is_overflow_safe(self):
        fam = build_family(3, [[0, 1, 2]])
        assert log_partition(fam, [-800.0]) == pytest.approx(1600.0 + math.log1p(math.exp(-800) + math.exp(-1600)))

    @pytest.mark.parametrize("beta,expected", [
        ([0.0], [0.5, 0.5]),
        ([LN3], [0.75, 0.25]),
    ])
    def test_bernoulli_density(self, beta, expected):
        np.testing.assert_allclose(density(bernoulli(), beta), expected, atol=1e-15)

    def test_categorical_uniform(self):
        np.testing.assert_allclose(density(categorical(3), [0, 0]), [1 / 3] * 3, atol=1e-15)

    def test_underflow_raises(self):
        with pytest.raises(NonFinite):
            density(bernoulli(), [800.0])

    def test_beta_shape_checked(self):
        with pytest.raises(DimensionMismatch):
            density(categorical(3), [0.0])

    @given(family_and_beta())
    def test_density_matches_enumeration(self, fb):
        fam, beta = fb
        p, _, _, _, psi = enumerate_moments(fam.stats, beta)
        np.testing.assert_allclose(density(fam, beta), p, rtol=1e-12, atol=1e-15)
        assert log_partition(fam, beta) == pytest.approx(psi, abs=1e-12)


class TestScoresAndTensors:
    @pytest.mark.parametrize("beta,row", [([0.0], [0.5, -0.5]), ([LN3], [0.25, -0.75])])
    def test_bernoulli_scores(self, beta, row):
        np.testing.assert_allclose(score_matrix(bernoulli(), beta), [row], atol=1e-15)

    @pytest.mark.parametrize("beta,g", [([0.0], 0.25), ([LN3], 3 / 16)])
    def test_bernoulli_metric(self, beta, g):
        assert fisher_metric(bernoulli(), beta).g[0, 0] == pytest.approx(g, abs=1e-15)

    def test_categorical_metric(self):
        np.testing.assert_allclose(fisher_metric(categorical(3), [0, 0]).g,
                                   [[2 / 9, -1 / 9], [-1 / 9, 2 / 9]], atol=1e-15)

    def test_bernoulli_skewness(self):
        assert skewness_tensor(bernoulli(), [0.0])[0, 0, 0] == pytest.approx(0.0, abs=1e-16)
        assert skewness_tensor(bernoulli(), [LN3])[0, 0, 0] == pytest.approx(-3 / 32, abs=1e-15)

    @given(family_and_beta())
    def test_scores_are_centred(self, fb):
        fam, beta = fb
        assert np.max(np.abs(score_matrix(fam, beta) @ density(fam, beta))) < 1e-12

    @given(family_and_beta())
    def test_metric_and_skewness_match_enumeration(self, fb):
        fam, beta = fb
        _, _, cov, third, _ = enumerate_moments(fam.stats, beta)
        np.testing.assert_allclose(fisher_metric(fam, beta).g, cov, atol=1e-13)
        np.testing.assert_allclose(skewness_tensor(fam, beta), third, atol=1e-13)

    @given(family_and_beta())
    def test_skewness_fully_symmetric(self, fb):
        fam, beta = fb
        t = skewness_tensor(fam, beta)
        for perm in [(1, 0, 2), (2, 1, 0), (0, 2, 1), (1, 2, 0)]:
            assert np.max(np.abs(t - t.transpose(perm))) == 0.0

    @given(family_and_beta())
    def test_metric_positive_definite(self, fb):
        fam, beta = fb
        assert np.linalg.eigvalsh(fisher_metric(fam, beta).g)[0] > 0

    @given(family_and_beta())
    def test_dual_basis_is_dual(self, fb):
        fam, beta = fb
        a = dual_basis(fam, beta)
        rho = density(fam, beta)
        pairing = (a * rho) @ score_matrix(fam, beta).T
        np.testing.assert_allclose(pairing, np.eye(fam.n), atol=1e-9)
        assert np.max(np.abs(a @ rho)) < 1e-12 * max(1.0, np.max(np.abs(a)))

    @given(family_and_beta())
    def test_metric_inverse(self, fb):
        fam, beta = fb
        m = fisher_metric(fam, beta)
        assert np.max(np.abs(m.g - m.g.T)) == 0.0
        np.testing.assert_allclose(m.g @ m.g_inv, np.eye(fam.n), atol=1e-10 * np.linalg.cond(m.g))

    def test_singular_metric_rejected(self):
        with pytest.raises(SingularMetric):
            MetricTensor.from_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestExpectationAndDuality:
    @pytest.mark.parametrize("fam,beta,eta", [
        (bernoulli(), [0.0], [0.5]),
        (bernoulli(), [math.log(7 / 3)], [0.3]),
        (categorical(3), [0.0, 0.0], [1 / 3, 1 / 3]),
    ])
    def test_expectation_values(self, fam, beta, eta):
        np.testing.assert_allclose(expectation_params(fam, beta), eta, atol=1e-15)

    @pytest.mark.parametrize("fam,beta,expected", [
        (bernoulli(), [0.0], -math.log(2)),
        (bernoulli(), [LN3], 0.75 * math.log(0.75) + 0.25 * math.log(0.25)),
        (categorical(3), [0.0, 0.0], -math.log(3)),
    ])
    def test_dual_potential_is_negative_entropy(self, fam, beta, expected):
        assert dual_potential(fam, beta) == pytest.approx(expected, abs=1e-15)

    @given(family_and_beta())
    def test_eta_is_minus_gradient_of_psi(self, fb):
        fam, beta = fb
        h = 1e-5
        grad = np.array([(log_partition(fam, beta + h * e) - log_partition(fam, beta - h * e)) / (2 * h)
                         for e in np.eye(fam.n)])
        np.testing.assert_allclose(-grad, expectation_params(fam, beta), atol=1e-8)

    @given(family_and_beta())
    def test_eta_inversion_round_trip(self, fb):
        fam, beta = fb
        back = natural_from_expectation(fam, expectation_params(fam, beta))
        np.testing.assert_allclose(back, beta, atol=1e-8)

    @given(family_and_beta())
    def test_saturated_chart_contains_family(self, fb):
        fam, beta = fb
        sat = saturate(fam)
        assert sat.n == fam.omega_size - 1
        np.testing.assert_array_equal(sat.stats[:fam.n], fam.stats)
        coords = natural_from_density(sat, density(fam, beta))
        np.testing.assert_allclose(coords[:fam.n], beta, atol=1e-9)
        np.testing.assert_allclose(coords[fam.n:], 0.0, atol=1e-9)


class TestDivergences:
    def test_kl_reference_value(self):
        expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        assert kl_divergence([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.143841, abs=1e-6)

    def test_kl_is_asymmetric(self):
        reverse = kl_divergence([0.25, 0.75], [0.5, 0.5])
        assert reverse == pytest.approx(0.25 * math.log(0.5) + 0.75 * math.log(1.5), abs=1e-15)
        assert reverse == pytest.approx(0.130812, abs=1e-6)
        assert reverse != kl_divergence([0.5, 0.5], [0.25, 0.75])

    @given(interior_probability(4))
    def test_kl_self_is_zero(self, p):
        assert kl_divergence(p, p) == 0.0

    @given(interior_probability(5), interior_probability(5))
    def test_kl_nonnegative_and_matches_plain_sum(self, p, q):
        value = kl_divergence(p, q)
        assert value >= 0.0
        assert value == pytest.approx(float(np.sum(p * np.log(p / q))), abs=1e-13)

    def test_kl_tiny_difference_keeps_precision(self):
        p = np.array([0.5, 0.5])
        d = 1e-9
        q = np.array([0.5 + d, 0.5 - d])
        # second-order term: sum d^2 / (2 p) = 2 d^2
        assert kl_divergence(p, q) == pytest.approx(2 * d * d, rel=1e-6)

    @pytest.mark.parametrize("bad", [[0.5, 0.5, 0.0], [0.6, 0.6, -0.2], [0.3, 0.3, 0.3], [np.nan, 0.5, 0.5]])
    def test_kl_rejects_bad_input(self, bad):
        with pytest.raises(InvalidProbability):
            kl_divergence(bad, [1 / 3] * 3)

    def test_kl_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            kl_divergence([0.5, 0.5], [1 / 3] * 3)

    @given(family_and_beta(), st.integers(0, 2**31))
    def test_bregman_equals_reversed_kl(self, fb, seed):
        fam, beta1 = fb
        beta2 = np.random.default_rng(seed).uniform(-2, 2, fam.n)
        kl = kl_divergence(density(fam, beta2), density(fam, beta1))
        assert bregman_divergence(fam, beta1, beta2) == pytest.approx(kl, abs=1e-12)
