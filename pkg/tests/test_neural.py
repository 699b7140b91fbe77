"""MLP policy: initialization, manual backprop, snapshots, and training."""

import numpy as np
import pytest

from nashgame import (
    GameSpec,
    InvalidInputError,
    MlpPolicy,
    VectorEstimator,
    mlp_backward,
    mlp_forward,
    mlp_init,
    neural_step,
    random_preference_matrix,
    regularized_dual_gap,
)
from nashgame.neural import ParamSnapshot, snapshot
from nashgame.stochastic import RngStream
from nashgame.updates import softmax

EXACT = VectorEstimator.exact()


def neural_game(seed, n_arms=10, beta=0.1):
    matrix = random_preference_matrix(seed, n_arms)
    policy = mlp_init(seed, n_arms)
    ref_logits = mlp_forward(policy).copy()
    return GameSpec(matrix=matrix, ref_logits=ref_logits, beta=beta), policy


class TestInit:
    def test_deterministic_per_seed(self):
        a, b = mlp_init(5, 20), mlp_init(5, 20)
        for pa, pb in zip(a.params(), b.params()):
            assert np.array_equal(pa, pb)
        assert np.array_equal(a.input_vec, b.input_vec)
        c = mlp_init(6, 20)
        assert not np.array_equal(a.w1, c.w1)

    def test_biases_are_zero(self):
        p = mlp_init(7, 15)
        assert not p.b1.any() and not p.b2.any() and not p.b3.any()

    def test_parameter_count(self):
        n = 100
        p = mlp_init(8, n)
        assert p.param_count() == 10 * 10 + 10 + 10 * 10 + 10 + 10 * n + n

    def test_xavier_variance(self):
        p = mlp_init(9, 100)
        # fan_in = 10, fan_out = 100: var = 2 / 110, checked over 1000 weights
        target = 2.0 / 110.0
        assert abs(p.w3.var() - target) / target < 0.2
        target1 = 2.0 / 20.0
        assert abs(p.w1.var() - target1) / target1 < 0.5

    def test_too_few_arms(self):
        with pytest.raises(InvalidInputError):
            mlp_init(0, 1)


class TestForward:
    def test_zero_weights_give_uniform_policy(self):
        p = mlp_init(10, 6)
        for arr in p.params():
            arr[...] = 0.0
        logits = mlp_forward(p)
        assert not logits.any()
        np.testing.assert_allclose(softmax(logits), np.full(6, 1 / 6), atol=1e-15)

    def test_final_layer_is_linear(self):
        p = mlp_init(11, 8)
        base = mlp_forward(p).copy()
        p.w3 *= 2.0
        p.b3 *= 2.0
        assert np.abs(mlp_forward(p) - 2.0 * base).max() < 1e-12

    def test_duplicate_path_recomputation(self):
        p = mlp_init(12, 7)
        logits = mlp_forward(p)
        # independent matrix-multiply recomputation
        h1 = np.maximum(p.w1 @ p.input_vec + p.b1, 0.0)
        h2 = np.maximum(p.w2 @ h1 + p.b2, 0.0)
        expect = p.w3 @ h2 + p.b3
        assert np.abs(logits - expect).max() < 1e-14


class TestBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        p = mlp_init(13, 5)
        mlp_forward(p)
        grads = mlp_backward(p, np.zeros(5))
        for g in (grads.w1, grads.b1, grads.w2, grads.b2, grads.w3, grads.b3):
            assert not g.any()

    def test_backward_without_forward_is_an_error(self):
        p = mlp_init(14, 5)
        with pytest.raises(InvalidInputError):
            mlp_backward(p, np.zeros(5))

    def test_finite_difference_every_layer(self):
        p = mlp_init(15, 10)
        rng = RngStream(15, 70)
        upstream = np.asarray(rng.normal(1.0, size=10))
        mlp_forward(p)
        grads = mlp_backward(p, upstream)
        grad_arrays = (grads.w1, grads.b1, grads.w2, grads.b2, grads.w3, grads.b3)
        h = 1e-6
        checked = 0
        for arr, g in zip(p.params(), grad_arrays):
            for idx in np.unique(rng.integers(arr.size, size=14)):
                orig = arr.flat[idx]
                arr.flat[idx] = orig + h
                up = float(upstream @ mlp_forward(p))
                arr.flat[idx] = orig - h
                down = float(upstream @ mlp_forward(p))
                arr.flat[idx] = orig
                fd = (up - down) / (2 * h)
                assert abs(fd - g.flat[idx]) / max(abs(fd), 1e-10) < 1e-5
                checked += 1
        assert checked >= 50

    def test_reference_logits_are_constants(self):
        # the frozen reference enters the update only through the target
        # vector; perturbing it must not change backprop of the network
        game, policy = neural_game(16)
        mlp_forward(policy)
        upstream = np.linspace(-1, 1, 10)
        g1 = mlp_backward(policy, upstream)
        g2 = mlp_backward(policy, upstream)
        assert np.array_equal(g1.w1, g2.w1) and np.array_equal(g1.w3, g2.w3)


class TestSnapshot:
    def test_bit_exact_involution(self):
        game, policy = neural_game(17)
        before = mlp_forward(policy).copy()
        snap = snapshot(policy)
        neural_step(game, policy, "omd", EXACT, eta=0.5)
        assert not np.array_equal(mlp_forward(policy), before)
        snap.restore(policy)
        assert np.array_equal(mlp_forward(policy), before)

    def test_half_step_changes_the_update(self):
        # the two-evaluation update must differ from the plain one unless
        # already at a fixed point; this is what the snapshot enables
        game, policy_a = neural_game(18)
        policy_b = policy_a.copy()
        neural_step(game, policy_a, "extragradient", EXACT, eta=0.5)
        neural_step(game, policy_b, "omd", EXACT, eta=0.5)
        assert not np.array_equal(mlp_forward(policy_a), mlp_forward(policy_b))

    def test_snapshot_roundtrip_is_flat_copy(self):
        _, policy = neural_game(19)
        snap = ParamSnapshot.take(policy)
        assert snap.flat.size == policy.param_count()


class TestNeuralStep:
    def test_fixed_point_logits_do_not_move(self):
        # if the network output already solves logits = ref + P pi / beta,
        # the gradient factor vanishes for all non-mixture updates
        game, policy = neural_game(20, n_arms=4, beta=2.0)
        # craft weights so the output equals the fixed point: solve in
        # logit space, then absorb into the final bias
        from nashgame import solve_equilibrium

        cert = solve_equilibrium(game, tol=1e-13)
        logits = mlp_forward(policy)
        policy.b3 += cert.logits - logits
        star = mlp_forward(policy).copy()
        for alg in ("extragradient", "omd", "online_ipo2"):
            p = policy.copy()
            neural_step(game, p, alg, EXACT, eta=0.3)
            assert np.abs(softmax(mlp_forward(p)) - softmax(star)).max() < 1e-9

    def test_omd_equals_extragradient_half_direction(self):
        game, policy = neural_game(21)
        a = policy.copy()
        b = policy.copy()
        # one omd step equals the half-step part of the two-phase update
        neural_step(game, a, "omd", EXACT, eta=0.4)
        snap = snapshot(b)
        fa = mlp_forward(a)
        # replicate the half-step manually through the same interface
        from nashgame.neural import _apply, _logit_space_gradient

        logits = mlp_forward(b)
        g = _logit_space_gradient(game, logits, softmax(logits), "uniform", EXACT)
        _apply(b, mlp_backward(b, g), 0.4 * game.beta * game.n / 4.0)
        fb = mlp_forward(b)
        assert np.array_equal(fa, fb)
        snap.restore(b)

    def test_unsupported_algorithm(self):
        game, policy = neural_game(22)
        with pytest.raises(InvalidInputError):
            neural_step(game, policy, "nash_md_pg", EXACT, eta=0.1)

    def test_training_reduces_gap(self):
        game, policy = neural_game(23)
        start = regularized_dual_gap(game, softmax(mlp_forward(policy)))
        for _ in range(800):
            neural_step(game, policy, "extragradient", EXACT, eta=0.75)
        end = regularized_dual_gap(game, softmax(mlp_forward(policy)))
        assert end < 0.5 * start

    def test_nash_md_uses_mixture_opponent(self):
        game, policy = neural_game(24)
        # move off the initial point first: there the current policy equals
        # the reference, so every mixture weight gives the same opponent
        neural_step(game, policy, "omd", EXACT, eta=0.4)
        a, b = policy.copy(), policy.copy()
        neural_step(game, a, "nash_md", EXACT, eta=0.4, gamma=0.0)
        neural_step(game, b, "omd", EXACT, eta=0.4)
        assert np.array_equal(mlp_forward(a), mlp_forward(b))
        c = policy.copy()
        neural_step(game, c, "nash_md", EXACT, eta=0.4, gamma=0.5)
        assert not np.array_equal(mlp_forward(a), mlp_forward(c))


class TestSerialization:
    def test_round_trip_preserves_forward_pass(self):
        _, policy = neural_game(25)
        logits = mlp_forward(policy).copy()
        clone = MlpPolicy.from_dict(policy.to_dict())
        assert np.array_equal(mlp_forward(clone), logits)

    def test_layout_mismatch_rejected(self):
        _, policy = neural_game(26)
        data = policy.to_dict()
        data["params"] = data["params"][:-1]
        with pytest.raises(InvalidInputError):
            MlpPolicy.from_dict(data)
