import math

import numpy as np
import pytest

from dofnet.categorical import (
    clamp_probabilities,
    deviance,
    encode_observations,
    expected_deviance,
    log_partition,
    mean_from_natural,
    natural_params,
    optimism,
    row_deviances,
    total_deviance,
)

LN2 = math.log(2.0)
LN3 = math.log(3.0)
LN4 = math.log(4.0)


class TestEncodeObservations:
    def test_first_class_one_hot(self):
        assert encode_observations([1], 3).tolist() == [[1.0, 0.0]]

    def test_last_class_all_zero(self):
        assert encode_observations([3], 3).tolist() == [[0.0, 0.0]]

    def test_binary_by_hand(self):
        # delta values enumerated by hand for k=2
        assert encode_observations([1, 2, 2], 2).tolist() == [[1.0], [0.0], [0.0]]

    def test_every_row_sums_to_zero_or_one(self):
        P = encode_observations([1, 2, 3, 4, 4, 2], 4)
        sums = P.sum(axis=1)
        assert set(P.ravel().tolist()) <= {0.0, 1.0}
        assert set(sums.tolist()) <= {0.0, 1.0}

    def test_out_of_range_label_names_index(self):
        with pytest.raises(ValueError, match="index 2"):
            encode_observations([1, 2, 5], 3)
        with pytest.raises(ValueError, match="index 0"):
            encode_observations([0], 3)


class TestNaturalParams:
    def test_equal_odds(self):
        assert natural_params([0.5, 0.5]) == pytest.approx([0.0])

    def test_uniform(self):
        np.testing.assert_allclose(natural_params([1 / 3, 1 / 3, 1 / 3]), [0.0, 0.0], atol=1e-15)

    def test_log_odds(self):
        assert natural_params([0.8, 0.2])[0] == pytest.approx(LN4, abs=1e-12)

    def test_rejects_zero_probability(self):
        with pytest.raises(ValueError, match="nonpositive"):
            natural_params([1.0, 0.0])


class TestLogPartition:
    def test_binary_zero(self):
        assert log_partition([0.0]) == pytest.approx(LN2, abs=1e-12)

    def test_three_way_zero(self):
        assert log_partition([0.0, 0.0]) == pytest.approx(LN3, abs=1e-12)

    def test_extreme_negative_logit_is_finite(self):
        assert log_partition([-1e6]) == pytest.approx(0.0, abs=1e-12)

    def test_extreme_positive_logit_is_finite(self):
        a = log_partition([1e6])
        assert math.isfinite(a) and a == pytest.approx(1e6)


class TestMeanFromNatural:
    def test_zero_log_odds(self):
        np.testing.assert_allclose(mean_from_natural([0.0]), [0.5, 0.5], atol=1e-15)

    def test_uniform(self):
        np.testing.assert_allclose(mean_from_natural([0.0, 0.0]), [1 / 3] * 3, atol=1e-15)

    def test_inverse_of_log_odds(self):
        np.testing.assert_allclose(mean_from_natural([LN4]), [0.8, 0.2], atol=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_round_trip(self, k):
        gen = np.random.default_rng(10 + k)
        for _ in range(50):
            mu = gen.dirichlet(np.ones(k)) * 0.999 + 0.001 / k
            mu = mu / mu.sum()
            back = mean_from_natural(natural_params(mu))
            np.testing.assert_allclose(back, mu, atol=1e-9)


class TestDeviance:
    def test_binary_half(self):
        assert deviance([1.0], [0.5, 0.5]) == pytest.approx(2 * LN2, abs=1e-12)

    def test_near_perfect_prediction(self):
        assert deviance([1.0], [1 - 1e-12, 1e-12]) == pytest.approx(0.0, abs=1e-9)

    def test_implied_class(self):
        assert deviance([0.0, 0.0], [0.25, 0.25, 0.5]) == pytest.approx(2 * LN2, abs=1e-12)

    def test_zero_probability_rejected_without_clamp(self):
        with pytest.raises(ValueError, match="zero predicted"):
            deviance([1.0], [1.0, 0.0])

    def test_clamp_keeps_zero_probability_finite(self):
        v = deviance([1.0], [0.0, 1.0], clamp=True)
        assert math.isfinite(v) and v > 0

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_one_hot_identity(self, k):
        # deviance(encode(y), mu) == -2 ln mu_y for every class and random mu
        gen = np.random.default_rng(77 + k)
        for _ in range(30):
            mu = gen.dirichlet(np.ones(k)) * 0.99 + 0.01 / k
            mu = mu / mu.sum()
            for y in range(1, k + 1):
                obs = encode_observations([y], k)[0]
                assert deviance(obs, mu) == pytest.approx(-2 * math.log(mu[y - 1]), abs=1e-9)

    def test_minimized_at_empirical_distribution(self):
        # repeated observations: best constant prediction is their empirical mix
        obs_rows = encode_observations([1, 1, 2, 3], 3)
        empirical = np.array([0.5, 0.25, 0.25])
        best = sum(deviance(row, empirical) for row in obs_rows)
        grid = np.linspace(0.05, 0.9, 12)
        for a in grid:
            for b in grid:
                if a + b >= 0.95:
                    continue
                cand = np.array([a, b, 1 - a - b])
                total = sum(deviance(row, cand) for row in obs_rows)
                assert total >= best - 1e-9


class TestExpectedDeviance:
    def test_matched_binary(self):
        assert expected_deviance([0.5, 0.5], [0.5, 0.5]) == pytest.approx(2 * LN2, abs=1e-12)

    def test_one_hot_truth_reduces_to_deviance(self):
        assert expected_deviance([1.0, 0.0], [0.5, 0.5]) == pytest.approx(
            deviance([1.0], [0.5, 0.5]), abs=1e-12)

    def test_matched_uniform_three_way(self):
        assert expected_deviance([1 / 3] * 3, [1 / 3] * 3) == pytest.approx(2 * LN3, abs=1e-12)

    def test_is_expectation_over_observations(self):
        gen = np.random.default_rng(5)
        mu_true = np.array([0.2, 0.5, 0.3])
        mu_hat = np.array([0.3, 0.4, 0.3])
        expected = sum(
            mu_true[y - 1] * deviance(encode_observations([y], 3)[0], mu_hat)
            for y in (1, 2, 3))
        assert expected_deviance(mu_true, mu_hat) == pytest.approx(expected, abs=1e-12)


class TestOptimism:
    def test_zero_when_obs_matches_truth(self):
        assert optimism([0.5], [0.5, 0.5], [0.8, 0.2]) == pytest.approx(0.0, abs=1e-15)

    def test_closed_form_value(self):
        # 2 * ln4 * (1 - 0.5) = ln 4
        assert optimism([1.0], [0.5, 0.5], [0.8, 0.2]) == pytest.approx(LN4, abs=1e-12)

    def test_uniform_prediction_has_zero_optimism(self):
        assert optimism([1.0, 0.0], [0.2, 0.3, 0.5], [1 / 3] * 3) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_equals_err_gap(self, k):
        gen = np.random.default_rng(42 + k)
        for _ in range(40):
            mu_true = gen.dirichlet(np.ones(k))
            mu_hat = gen.dirichlet(np.ones(k)) * 0.99 + 0.01 / k
            mu_hat = mu_hat / mu_hat.sum()
            y = int(gen.integers(1, k + 1))
            obs = encode_observations([y], k)[0]
            gap = expected_deviance(mu_true, mu_hat) - deviance(obs, mu_hat)
            assert optimism(obs, mu_true, mu_hat) == pytest.approx(gap, abs=1e-9)


class TestTotalDeviance:
    def test_single_row_matches_deviance(self):
        P = np.array([[1.0]])
        M = np.array([[0.5, 0.5]])
        assert total_deviance(P, M) == pytest.approx(deviance([1.0], [0.5, 0.5]), abs=1e-12)

    def test_additivity(self):
        P = np.array([[1.0], [1.0]])
        M = np.array([[0.7, 0.3], [0.7, 0.3]])
        assert total_deviance(P, M) == pytest.approx(2 * deviance([1.0], [0.7, 0.3]), abs=1e-12)

    def test_three_mixed_rows_hand_summed(self):
        # one-hot rows: deviance is -2 ln(prob of observed class)
        P = encode_observations([1, 3, 2], 3)
        M = np.array([[0.6, 0.3, 0.1],
                      [0.2, 0.2, 0.6],
                      [0.25, 0.5, 0.25]])
        expected = -2 * (math.log(0.6) + math.log(0.6) + math.log(0.5))
        assert total_deviance(P, M) == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            total_deviance(np.ones((2, 1)), np.full((3, 2), 0.5))

    def test_row_deviances_match_scalar_path(self):
        gen = np.random.default_rng(3)
        P = encode_observations(gen.integers(1, 4, size=6), 3)
        M = gen.dirichlet(np.ones(3), size=6)
        rows = row_deviances(P, M, clamp=False)
        for i in range(6):
            assert rows[i] == pytest.approx(deviance(P[i], M[i]), abs=1e-12)


class TestCovarianceFacts:
    def test_sampled_observation_moments(self):
        # cov(p_j, p_l) = -mu_j mu_l (j != l), var(p_j) = mu_j (1 - mu_j)
        gen = np.random.default_rng(2024)
        mu = np.array([0.5, 0.3, 0.2])
        n = 1_200_000
        y = gen.choice(3, size=n, p=mu) + 1
        P = encode_observations(y, 3)
        emp_cov = np.cov(P.T, bias=True)
        for j in range(2):
            for l in range(2):
                if j == l:
                    target = mu[j] * (1 - mu[j])
                    # MC standard error of a variance estimate
                    se = math.sqrt(2.0 / n) * target + 3.0 / n
                else:
                    target = -mu[j] * mu[l]
                    se = math.sqrt(mu[j] * mu[l] / n)
                assert abs(emp_cov[j, l] - target) <= 3 * max(se, 1e-4), (j, l)


def test_clamp_probabilities_bounds():
    arr = np.array([0.0, 0.5, 1.0])
    out = clamp_probabilities(arr)
    assert out[0] == 1e-12 and out[2] == 1 - 1e-12 and out[1] == 0.5
