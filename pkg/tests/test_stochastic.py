"""Randomness sources, estimators, and their Monte Carlo contracts."""

import math

import numpy as np
import pytest

from nashgame import (
    GameSpec,
    InvalidInputError,
    PreferenceMatrix,
    estimate_p_pi,
    inf_norm_square_diagnostic,
    ipo_gradient,
    preference_sample,
    random_preference_matrix,
    random_ref_logits,
    sampled_ipo_gradient,
    uniform_pair_operator,
)
from nashgame.stochastic import RngStream, VectorEstimator
from nashgame.updates import softmax


def seeded_game(seed, n=5, beta=0.2):
    return GameSpec(
        matrix=random_preference_matrix(seed, n),
        ref_logits=random_ref_logits(seed + 1000, n),
        beta=beta,
    )


class TestRngStream:
    def test_bit_identical_reruns(self):
        a, b = RngStream(7, 3), RngStream(7, 3)
        assert np.array_equal(a.uniform(500), b.uniform(500))
        assert np.array_equal(a.normal(1.5, 500), b.normal(1.5, 500))
        assert np.array_equal(a.integers(10, 500), b.integers(10, 500))

    def test_distinct_streams_differ(self):
        a, b = RngStream(7, 3), RngStream(7, 4)
        assert not np.array_equal(a.uniform(100), b.uniform(100))
        c = RngStream(8, 3)
        assert not np.array_equal(RngStream(7, 3).uniform(100), c.uniform(100))

    def test_draw_accounting(self):
        rng = RngStream(1, 1)
        rng.uniform(10)
        rng.normal(1.0, (3, 4))
        rng.bernoulli(0.5)
        assert rng.draws == 10 + 12 + 1

    def test_categorical_matches_probabilities(self):
        rng = RngStream(2, 1)
        probs = np.array([0.7, 0.2, 0.1])
        draws = rng.categorical(probs, size=100000)
        freq = np.bincount(draws, minlength=3) / 100000
        assert np.abs(freq - probs).max() < 0.01


class TestPreferenceSample:
    def test_degenerate_entries(self):
        m = PreferenceMatrix(np.array([[0.5, 1.0], [0.0, 0.5]]))
        rng = RngStream(3, 1)
        assert all(preference_sample(m, 0, 1, rng) == 1 for _ in range(100))
        assert all(preference_sample(m, 1, 0, rng) == 0 for _ in range(100))

    def test_diagonal_is_fair(self):
        m = random_preference_matrix(4, 3)
        rng = RngStream(4, 1)
        draws = [preference_sample(m, 1, 1, rng) for _ in range(10**5)]
        # binomial mean, 3 sigma band: 0.5 +- 3 * 0.5 / sqrt(1e5)
        assert abs(np.mean(draws) - 0.5) < 0.005

    def test_index_validation(self):
        m = random_preference_matrix(5, 3)
        with pytest.raises(InvalidInputError):
            preference_sample(m, 0, 3, RngStream(0, 0))


class TestEstimatePPi:
    def test_exact_is_matrix_vector_product(self):
        game = seeded_game(6)
        pi = softmax(game.ref_logits)
        est = estimate_p_pi(game.matrix, pi, VectorEstimator.exact())
        assert np.abs(est - game.matrix.entries @ pi).max() < 1e-14

    def test_zero_sigma_gaussian_equals_exact(self):
        game = seeded_game(7)
        pi = softmax(game.ref_logits)
        gauss = VectorEstimator.gaussian(0.0, RngStream(7, 2))
        assert np.array_equal(
            estimate_p_pi(game.matrix, pi, gauss),
            estimate_p_pi(game.matrix, pi, VectorEstimator.exact()),
        )

    def test_gaussian_noise_has_requested_scale(self):
        game = seeded_game(8)
        pi = softmax(game.ref_logits)
        exact = game.matrix.entries @ pi
        rng = RngStream(8, 2)
        est = VectorEstimator.gaussian(0.25, rng)
        noise = np.concatenate(
            [estimate_p_pi(game.matrix, pi, est) - exact for _ in range(2000)]
        )
        assert abs(noise.mean()) < 0.01
        assert abs(noise.std() - 0.25) < 0.01

    def test_sampled_large_n_is_close(self):
        game = seeded_game(9, n=3)
        pi = softmax(game.ref_logits)
        exact = game.matrix.entries @ pi
        est = VectorEstimator.sampled(10**5, RngStream(9, 2))
        approx = estimate_p_pi(game.matrix, pi, est)
        # 3 sigma binomial bound at N = 1e5 is under 0.005 per coordinate
        assert np.abs(approx - exact).max() < 0.01

    def test_sampled_error_shrinks_with_sample_count(self):
        game = seeded_game(10, n=3)
        pi = softmax(game.ref_logits)
        exact = game.matrix.entries @ pi
        errors = []
        for n_samples in (10**2, 10**4, 10**6):
            errs = [
                np.abs(
                    estimate_p_pi(
                        game.matrix, pi, VectorEstimator.sampled(n_samples, RngStream(s, 2))
                    )
                    - exact
                ).max()
                for s in range(10)
            ]
            errors.append(np.mean(errs))
        for big, small in zip(errors, errors[1:]):
            assert 5.0 <= big / small <= 20.0

    def test_estimator_validation(self):
        with pytest.raises(InvalidInputError):
            VectorEstimator(mode="sampled", n_samples=0, rng=RngStream(0, 0))
        with pytest.raises(InvalidInputError):
            VectorEstimator(mode="gaussian", sigma=1.0)
        with pytest.raises(InvalidInputError):
            VectorEstimator(mode="quantum")


class TestSampledIpoGradient:
    def test_orthogonal_to_ones(self):
        game = seeded_game(11)
        rng = RngStream(11, 3)
        logits = np.asarray(rng.normal(1.0, size=5))
        mu = softmax(game.ref_logits)
        grad = sampled_ipo_gradient(game, logits, mu, 5000, rng)
        assert abs(grad.sum()) < 1e-12

    def test_unbiased_against_exact_gradient(self):
        for seed in range(5):
            game = seeded_game(seed + 30)
            rng = RngStream(seed + 30, 3)
            logits = np.asarray(rng.normal(1.0, size=5))
            draws = -np.log(np.asarray(rng.uniform(5)))
            mu = draws / draws.sum()
            exact = ipo_gradient(game, logits, uniform_pair_operator(5), mu)
            chunks = np.stack(
                [sampled_ipo_gradient(game, logits, mu, 10**4, rng) for _ in range(100)]
            )
            se = chunks.std(axis=0, ddof=1) / math.sqrt(100)
            z = np.abs(chunks.mean(axis=0) - exact) / np.maximum(se, 1e-15)
            assert z.max() < 3.0

    def test_deterministic_comparisons_concentrated_opponent(self):
        # every off-diagonal comparison is decided, opponent fixed on arm 0
        entries = np.array(
            [[0.5, 1.0, 1.0], [0.0, 0.5, 1.0], [0.0, 0.0, 0.5]]
        )
        game = GameSpec(
            matrix=PreferenceMatrix(entries), ref_logits=np.zeros(3), beta=0.5
        )
        mu = np.array([1.0, 0.0, 0.0])
        rng = RngStream(12, 3)
        logits = np.array([0.3, -0.2, 0.1])
        exact = ipo_gradient(game, logits, uniform_pair_operator(3), mu)
        chunks = np.stack(
            [sampled_ipo_gradient(game, logits, mu, 10**4, rng) for _ in range(100)]
        )
        se = chunks.std(axis=0, ddof=1) / math.sqrt(100)
        z = np.abs(chunks.mean(axis=0) - exact) / np.maximum(se, 1e-15)
        assert z.max() < 3.0

    def test_sample_count_validation(self):
        game = seeded_game(13)
        with pytest.raises(InvalidInputError):
            sampled_ipo_gradient(game, np.zeros(5), softmax(game.ref_logits), 0, RngStream(0, 0))


class TestInfNormDiagnostic:
    def test_zero_sigma(self):
        mean, bound = inf_norm_square_diagnostic(0.0, 5, 100, RngStream(14, 4))
        assert mean == 0.0 and bound == 0.0

    def test_scalar_case(self):
        mean, bound = inf_norm_square_diagnostic(1.0, 1, 10**5, RngStream(15, 4))
        assert abs(mean - 1.0) < 0.05
        assert bound == pytest.approx(4.0 * math.log(3.0), abs=1e-12)
        assert mean <= bound

    def test_ten_dimensional_bound(self):
        mean, bound = inf_norm_square_diagnostic(1.0, 10, 10**5, RngStream(16, 4))
        assert bound == pytest.approx(4.0 * math.log(30.0), abs=1e-12)
        assert mean <= bound

    def test_trial_validation(self):
        with pytest.raises(InvalidInputError):
            inf_norm_square_diagnostic(1.0, 3, 0, RngStream(0, 0))
