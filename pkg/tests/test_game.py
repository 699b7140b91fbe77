"""Core game quantities: matrices, policies, values, gaps, and the oracle."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nashgame import (
    ConvergenceError,
    EquilibriumCertificate,
    GameSpec,
    InfiniteDivergenceError,
    InvalidInputError,
    PreferenceMatrix,
    TabularPolicy,
    best_response,
    dual_gap,
    equilibrium_residual,
    kl_divergence,
    policy_probs,
    random_preference_matrix,
    random_ref_logits,
    regularized_dual_gap,
    regularized_value,
    solve_equilibrium,
    value,
)
from nashgame.stochastic import RngStream
from nashgame.updates import softmax

RPS = PreferenceMatrix(np.array([[0.5, 1.0, 0.0], [0.0, 0.5, 1.0], [1.0, 0.0, 0.5]]))
TWO_ARM = PreferenceMatrix(np.array([[0.5, 1.0], [0.0, 0.5]]))


def seeded_game(seed, n=10, beta=0.1):
    return GameSpec(
        matrix=random_preference_matrix(seed, n),
        ref_logits=random_ref_logits(seed + 1000, n),
        beta=beta,
    )


def random_simplex(rng, n):
    draws = -np.log(np.asarray(rng.uniform(n)))
    return draws / draws.sum()


class TestPreferenceMatrix:
    def test_generated_matrices_satisfy_invariants(self):
        for seed, n in ((0, 2), (3, 10), (5, 100)):
            m = random_preference_matrix(seed, n)
            assert np.abs(m.entries + m.entries.T - 1.0).max() <= 1e-12
            assert np.all(np.diag(m.entries) == 0.5)
            assert m.entries.min() >= 0.0 and m.entries.max() <= 1.0

    def test_generation_is_deterministic(self):
        a = random_preference_matrix(42, 10)
        b = random_preference_matrix(42, 10)
        assert np.array_equal(a.entries, b.entries)
        c = random_preference_matrix(43, 10)
        assert not np.array_equal(a.entries, c.entries)

    def test_rejects_small_or_inconsistent(self):
        with pytest.raises(InvalidInputError):
            random_preference_matrix(0, 1)
        with pytest.raises(InvalidInputError):
            PreferenceMatrix(np.array([[0.5, 0.4], [0.4, 0.5]]))
        with pytest.raises(InvalidInputError):
            PreferenceMatrix(np.array([[0.4, 1.0], [0.0, 0.6]]))

    def test_json_round_trip(self):
        m = random_preference_matrix(7, 4)
        again = PreferenceMatrix.from_dict(m.to_dict())
        assert np.array_equal(m.entries, again.entries)

    def test_entries_are_immutable(self):
        m = random_preference_matrix(1, 3)
        with pytest.raises(ValueError):
            m.entries[0, 1] = 0.9


class TestPolicyProbs:
    def test_symmetric_logits(self):
        assert np.allclose(policy_probs([0.0, 0.0]), [0.5, 0.5], atol=0)

    def test_constant_logits_any_value(self):
        for c in (-1e3, 0.0, 7.5):
            np.testing.assert_allclose(policy_probs([c, c, c]), np.full(3, 1 / 3), atol=1e-15)

    def test_two_logit_reference_value(self):
        # exp(1) / (exp(1) + exp(0)), evaluated independently
        expect = math.exp(1.0) / (math.exp(1.0) + 1.0)
        p = policy_probs([1.0, 0.0])
        assert abs(p[0] - expect) < 1e-15
        assert abs(p[0] - 0.73106) < 5e-6 and abs(p[1] - 0.26894) < 5e-6

    def test_extreme_logits_do_not_overflow(self):
        p = policy_probs([1e3, 0.0, -1e3])
        assert np.isfinite(p).all() and abs(p.sum() - 1.0) < 1e-12

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            policy_probs([np.nan, 0.0])
        with pytest.raises(InvalidInputError):
            TabularPolicy(np.array([np.inf, 0.0]))

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-30, 30), min_size=2, max_size=8),
        st.floats(-100, 100),
    )
    def test_shift_invariance(self, logits, shift):
        base = policy_probs(logits)
        shifted = policy_probs(np.asarray(logits) + shift)
        assert np.abs(base - shifted).max() <= 1e-14


class TestKl:
    def test_identical_distributions(self):
        p = np.array([0.2, 0.3, 0.5])
        assert kl_divergence(p, p) == 0.0

    def test_reference_value(self):
        # 0.5*log(0.5/0.75) + 0.5*log(0.5/0.25) = 0.5*log(4/3)
        expect = 0.5 * math.log(4.0 / 3.0)
        assert abs(kl_divergence([0.5, 0.5], [0.75, 0.25]) - expect) < 1e-15
        assert abs(expect - 0.143841) < 1e-6

    def test_point_mass_against_uniform(self):
        assert abs(kl_divergence([1.0, 0.0], [0.5, 0.5]) - math.log(2.0)) < 1e-15

    def test_infinite_divergence(self):
        with pytest.raises(InfiniteDivergenceError):
            kl_divergence([0.5, 0.5], [1.0, 0.0])

    def test_pinsker_inequality(self):
        rng = RngStream(11, 50)
        for _ in range(1000):
            p = random_simplex(rng, 6)
            q = random_simplex(rng, 6)
            assert np.abs(p - q).sum() <= math.sqrt(2.0 * kl_divergence(p, q)) + 1e-12


class TestValue:
    def test_self_play_is_half(self):
        rng = RngStream(12, 50)
        m = random_preference_matrix(12, 7)
        for _ in range(100):
            pi = random_simplex(rng, 7)
            assert abs(value(m, pi, pi) - 0.5) < 1e-12

    def test_uniform_rps(self):
        u = np.full(3, 1 / 3)
        assert abs(value(RPS, u, u) - 0.5) < 1e-15

    def test_two_arm_enumeration(self):
        # e1 vs uniform: 0.5 * P[0,0] + 0.5 * P[0,1], enumerated by hand
        expect = 0.5 * 0.5 + 0.5 * 1.0
        assert value(TWO_ARM, [1.0, 0.0], [0.5, 0.5]) == pytest.approx(expect, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInputError):
            value(TWO_ARM, [1.0, 0.0, 0.0], [0.5, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6))
    def test_antisymmetry(self, seed):
        rng = RngStream(seed, 50)
        m = random_preference_matrix(seed, 5)
        p, q = random_simplex(rng, 5), random_simplex(rng, 5)
        assert abs(value(m, p, q) + value(m, q, p) - 1.0) <= 1e-12
        assert abs((p - q) @ m.entries @ (p - q)) <= 1e-10


class TestRegularizedValue:
    def test_reference_play_is_half(self):
        game = seeded_game(0)
        ref = game.ref_probs()
        assert abs(regularized_value(game, ref, ref) - 0.5) < 1e-12

    def test_antisymmetry_sums_to_one(self):
        game = seeded_game(1, n=4)
        rng = RngStream(1, 51)
        for _ in range(100):
            p, q = random_simplex(rng, 4), random_simplex(rng, 4)
            total = regularized_value(game, p, q) + regularized_value(game, q, p)
            assert abs(total - 1.0) < 1e-12

    def test_spot_value_matches_raw_formula(self):
        game = seeded_game(2, n=3, beta=0.3)
        rng = RngStream(2, 51)
        p, q = random_simplex(rng, 3), random_simplex(rng, 3)
        # independent scalar recomputation, term by term
        ref = np.exp(game.ref_logits) / np.exp(game.ref_logits).sum()
        raw = 0.0
        for i in range(3):
            for j in range(3):
                raw += p[i] * game.matrix.entries[i, j] * q[j]
        raw -= game.beta * sum(p[i] * math.log(p[i] / ref[i]) for i in range(3))
        raw += game.beta * sum(q[i] * math.log(q[i] / ref[i]) for i in range(3))
        assert abs(regularized_value(game, p, q) - raw) < 1e-12


class TestBestResponse:
    def test_fixed_point_at_equilibrium(self):
        game = seeded_game(3)
        cert = solve_equilibrium(game)
        star = cert.probs()
        br, val = best_response(game, star, "max")
        assert np.abs(br.probs() - star).max() < 1e-9
        assert abs(val - regularized_value(game, star, star)) < 1e-9

    def test_rps_uniform_reference(self):
        game = GameSpec(matrix=RPS, ref_logits=np.zeros(3), beta=0.25)
        br, _ = best_response(game, np.full(3, 1 / 3), "max")
        np.testing.assert_allclose(br.probs(), np.full(3, 1 / 3), atol=1e-14)

    def test_max_dominates_random_probes(self):
        game = seeded_game(4, n=3, beta=0.5)
        rng = RngStream(4, 52)
        pi = random_simplex(rng, 3)
        _, hi = best_response(game, pi, "max")
        for _ in range(10000):
            probe = random_simplex(rng, 3)
            assert regularized_value(game, probe, pi) <= hi + 1e-10

    def test_min_is_dominated_by_random_probes(self):
        game = seeded_game(5, n=4, beta=0.5)
        rng = RngStream(5, 52)
        pi = random_simplex(rng, 4)
        _, lo = best_response(game, pi, "min")
        for _ in range(2000):
            probe = random_simplex(rng, 4)
            assert regularized_value(game, pi, probe) >= lo - 1e-10

    def test_invalid_side(self):
        game = seeded_game(6)
        with pytest.raises(InvalidInputError):
            best_response(game, game.ref_probs(), "maximize")


class TestDualGap:
    def test_zero_at_rps_equilibrium(self):
        assert abs(dual_gap(RPS, np.full(3, 1 / 3))) < 1e-15

    def test_two_arm_enumeration(self):
        # P pi = (0.75, 0.25), P^T pi = (0.25, 0.75): gap = 0.75 - 0.25
        assert dual_gap(TWO_ARM, [0.5, 0.5]) == pytest.approx(0.5, abs=1e-15)

    def test_nonnegative_everywhere(self):
        m = random_preference_matrix(9, 6)
        rng = RngStream(9, 53)
        for _ in range(500):
            assert dual_gap(m, random_simplex(rng, 6)) >= 0.0


class TestRegularizedDualGap:
    def test_zero_at_certified_equilibrium(self):
        for seed in range(3):
            game = seeded_game(seed)
            cert = solve_equilibrium(game)
            assert regularized_dual_gap(game, cert.probs()) <= 1e-9

    def test_positive_off_equilibrium(self):
        game = seeded_game(10)
        perturbed = softmax(game.ref_logits + 0.3)
        assert regularized_dual_gap(game, perturbed) > 0.0

    def test_matches_explicit_closed_form(self):
        game = seeded_game(11, n=5, beta=0.4)
        rng = RngStream(11, 53)
        pi = random_simplex(rng, 5)
        ref = game.ref_probs()
        score_max = game.matrix.entries @ pi
        score_min = game.matrix.entries.T @ pi
        closed = (
            game.beta * math.log(np.sum(ref * np.exp(score_max / game.beta)))
            + game.beta * math.log(np.sum(ref * np.exp(-score_min / game.beta)))
            + 2.0 * game.beta * kl_divergence(pi, ref)
        )
        assert abs(regularized_dual_gap(game, pi) - closed) < 1e-10

    def test_brute_force_simplex_grid(self):
        # exhaustive grid over the 3-simplex with step 0.01
        step = 0.01
        k = round(1.0 / step)
        pts = []
        for i in range(k + 1):
            for j in range(k + 1 - i):
                pts.append((i * step, j * step, max(1.0 - i * step - j * step, 0.0)))
        grid = np.array(pts)
        for seed in range(5):
            game = seeded_game(seed, n=3, beta=0.5)
            rng = RngStream(seed, 54)
            pi = random_simplex(rng, 3)
            ref = game.ref_probs()
            grid_kl = np.zeros(len(grid))
            for idx, row in enumerate(grid):
                mask = row > 0
                grid_kl[idx] = np.sum(row[mask] * np.log(row[mask] / ref[mask]))
            base = kl_divergence(pi, ref)
            vmax = np.max(grid @ (game.matrix.entries @ pi) - game.beta * grid_kl) + game.beta * base
            vmin = np.min(grid @ (game.matrix.entries.T @ pi) + game.beta * grid_kl) - game.beta * base
            brute = vmax - vmin
            assert abs(regularized_dual_gap(game, pi) - brute) <= 0.02


class TestEquilibriumOracle:
    def test_rps_uniform(self):
        game = GameSpec(matrix=RPS, ref_logits=np.zeros(3), beta=0.1)
        cert = solve_equilibrium(game, tol=1e-12)
        np.testing.assert_allclose(cert.probs(), np.full(3, 1 / 3), atol=1e-11)

    def test_indifferent_matrix_returns_reference(self):
        m = PreferenceMatrix(np.full((4, 4), 0.5))
        ref = random_ref_logits(77, 4)
        game = GameSpec(matrix=m, ref_logits=ref, beta=0.05)
        cert = solve_equilibrium(game, tol=1e-12)
        np.testing.assert_allclose(cert.probs(), softmax(ref), atol=1e-11)

    def test_certificate_and_cross_initialization(self):
        game = seeded_game(13)
        cert = solve_equilibrium(game, tol=1e-12)
        assert cert.residual_inf_norm <= 1e-12
        assert equilibrium_residual(game, cert.logits) <= 1e-12
        other = solve_equilibrium(game, tol=1e-12, initial_logits=np.zeros(game.n))
        assert np.abs(cert.probs() - other.probs()).max() <= 1e-10

    def test_budget_exhaustion_carries_best_residual(self):
        game = seeded_game(14)
        with pytest.raises(ConvergenceError) as err:
            solve_equilibrium(game, tol=1e-13, max_iters=3)
        assert err.value.best_residual > 0
        assert err.value.iterations <= 3

    def test_certificate_serialization(self):
        game = seeded_game(155)
        cert = solve_equilibrium(game)
        again = EquilibriumCertificate.from_dict(cert.to_dict())
        assert np.array_equal(cert.logits, again.logits)
        assert again.residual_inf_norm == cert.residual_inf_norm

    def test_invalid_certificate_rejected(self):
        with pytest.raises(InvalidInputError):
            EquilibriumCertificate(np.zeros(3), residual_inf_norm=1.0, tolerance=1e-12)


class TestGameSpecValidation:
    def test_beta_must_be_positive(self):
        m = random_preference_matrix(0, 3)
        with pytest.raises(InvalidInputError):
            GameSpec(matrix=m, ref_logits=np.zeros(3), beta=0.0)

    def test_dimensions_must_agree(self):
        m = random_preference_matrix(0, 3)
        with pytest.raises(InvalidInputError):
            GameSpec(matrix=m, ref_logits=np.zeros(4), beta=0.1)
