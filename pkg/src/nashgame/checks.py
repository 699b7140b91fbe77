"""Self-contained invariant suite behind the `check` CLI subcommand.

Every property here is also exercised by the test suite; this module keeps
them runnable from an installed package without pytest. Each check returns
None on success or a failure description.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from . import harness
from .bounds import theorem_step_size
from .errors import NashGameError
from .game import (
    GameSpec,
    PreferenceMatrix,
    best_response,
    dual_gap,
    kl_divergence,
    random_preference_matrix,
    random_ref_logits,
    regularized_dual_gap,
    regularized_value,
    solve_equilibrium,
    value,
)
from .neural import mlp_backward, mlp_forward, mlp_init, neural_step, snapshot
from .solvers import (
    SolverRunConfig,
    extragradient_step,
    extragradient_step_via_ipo,
    ipo_gradient,
    nash_md_pg_step,
    nash_md_step,
    omd_step,
    online_ipo2_step,
    product_pair_operator,
    run_solver,
    uniform_pair_operator,
)
from .stochastic import (
    DIAG_STREAM,
    RngStream,
    VectorEstimator,
    estimate_p_pi,
    inf_norm_square_diagnostic,
    sampled_ipo_gradient,
)
from .updates import softmax


def _seeded_game(seed: int, n: int = 10, beta: float = 0.1) -> GameSpec:
    return GameSpec(
        matrix=random_preference_matrix(seed, n),
        ref_logits=random_ref_logits(seed + 1000, n),
        beta=beta,
    )


def _random_simplex(rng: RngStream, n: int) -> np.ndarray:
    draws = -np.log(np.asarray(rng.uniform(n)))
    return draws / draws.sum()


def check_matrix_construction():
    for seed, n in ((0, 2), (1, 10), (2, 100)):
        m = random_preference_matrix(seed, n)
        e = m.entries
        if np.abs(e + e.T - 1.0).max() > 1e-12:
            return f"complementarity violated for seed={seed} n={n}"
        if np.any(np.diag(e) != 0.5):
            return f"diagonal not exactly 0.5 for seed={seed} n={n}"
        again = random_preference_matrix(seed, n)
        if not np.array_equal(e, again.entries):
            return f"matrix generation not deterministic for seed={seed}"
    return None


def check_value_antisymmetry():
    m = random_preference_matrix(3, 10)
    rng = RngStream(3, DIAG_STREAM)
    for _ in range(1000):
        p, q = _random_simplex(rng, 10), _random_simplex(rng, 10)
        if abs(value(m, p, q) + value(m, q, p) - 1.0) > 1e-12:
            return "value(p, q) + value(q, p) deviates from 1"
        if abs((p - q) @ m.entries @ (p - q)) > 1e-10:
            return "skew quadratic form is not annihilated"
    return None


def check_pinsker():
    rng = RngStream(4, DIAG_STREAM)
    for _ in range(1000):
        p, q = _random_simplex(rng, 8), _random_simplex(rng, 8)
        if np.abs(p - q).sum() > math.sqrt(2.0 * kl_divergence(p, q)) + 1e-12:
            return "L1 distance exceeds the KL envelope"
    return None


def check_gaps_at_equilibrium():
    rng = RngStream(5, DIAG_STREAM)
    # cyclic win matrix: uniform play is the exact unregularized equilibrium
    rps = PreferenceMatrix(
        np.array([[0.5, 1.0, 0.0], [0.0, 0.5, 1.0], [1.0, 0.0, 0.5]])
    )
    if abs(dual_gap(rps, np.full(3, 1 / 3))) > 1e-12:
        return "unregularized gap not zero at the cyclic-game equilibrium"
    for seed in range(3):
        game = _seeded_game(seed)
        cert = solve_equilibrium(game)
        star = cert.probs()
        if regularized_dual_gap(game, star) > 1e-9:
            return "regularized gap not zero at certified equilibrium"
        for _ in range(50):
            pi = _random_simplex(rng, game.n)
            if dual_gap(game.matrix, pi) < 0 or regularized_dual_gap(game, pi) < -1e-12:
                return "negative gap at a random policy"
    return None


def check_oracle_certification():
    game = _seeded_game(7)
    tol = 1e-12
    cert_a = solve_equilibrium(game, tol=tol)
    cert_b = solve_equilibrium(game, tol=tol, initial_logits=np.zeros(game.n))
    if cert_a.residual_inf_norm > tol:
        return "certificate residual above tolerance"
    if np.abs(cert_a.probs() - cert_b.probs()).max() > 1e-10:
        return "certificates from two initializations disagree"
    return None


def check_best_response_dominance():
    game = _seeded_game(8, n=3, beta=0.5)
    rng = RngStream(8, DIAG_STREAM)
    pi = _random_simplex(rng, 3)
    _, hi = best_response(game, pi, "max")
    for _ in range(10000):
        probe = _random_simplex(rng, 3)
        if regularized_value(game, probe, pi) > hi + 1e-10:
            return "a random probe beat the closed-form best response"
    return None


def check_fixed_points():
    exact = VectorEstimator.exact()
    for seed in range(3):
        game = _seeded_game(seed, beta=0.1)
        cert = solve_equilibrium(game)
        star = cert.logits
        eta = theorem_step_size(game.beta)
        for name, step in (
            ("extragradient", lambda: extragradient_step(game, star, eta, exact)),
            ("omd", lambda: omd_step(game, star, eta, exact)),
            ("online_ipo2", lambda: online_ipo2_step(game, star, eta, exact)),
        ):
            out = step()
            if np.abs(softmax(out.next_logits) - softmax(star)).max() > 1e-10:
                return f"{name} moved away from the equilibrium"
        gamma = 0.125
        mix_cert = solve_equilibrium(game, mixture_gamma=gamma)
        mixed = mix_cert.logits
        for name, step in (
            ("nash_md", lambda: nash_md_step(game, mixed, eta, exact, gamma)),
            ("nash_md_pg", lambda: nash_md_pg_step(game, mixed, eta, exact, gamma)),
        ):
            out = step()
            if np.abs(softmax(out.next_logits) - softmax(mixed)).max() > 1e-10:
                return f"{name} moved away from its mixture fixed point"
    return None


def check_gradient_form_equivalence():
    exact = VectorEstimator.exact()
    for seed in range(10):
        game = _seeded_game(seed, beta=0.05)
        eta = theorem_step_size(game.beta)
        direct = game.ref_logits.copy()
        via = game.ref_logits.copy()
        for _ in range(200):
            direct = extragradient_step(game, direct, eta, exact).next_logits
            via = extragradient_step_via_ipo(game, via, eta, exact).next_logits
            if np.abs(softmax(direct) - softmax(via)).max() > 1e-12:
                return f"trajectories diverged on seed {seed}"
    return None


def check_linear_kl_bound():
    for seed in range(5):
        game = _seeded_game(seed)
        eta = theorem_step_size(game.beta)
        cfg = SolverRunConfig(
            algorithm="extragradient", eta=eta, iters=300, seed=seed, metric_every=1
        )
        record = run_solver(game, cfg)
        kl0 = record.rows[0].kl_star_pi
        rate = 1.0 - eta * game.beta
        for row in record.rows:
            if row.kl_star_pi > kl0 * rate**row.iter + 1e-9:
                return f"KL bound violated at iteration {row.iter} on seed {seed}"
    return None


def check_ipo_gradient_finite_difference():
    game = _seeded_game(11, n=5, beta=0.3)
    rng = RngStream(11, DIAG_STREAM)
    logits = np.asarray(rng.normal(1.0, size=5))
    mu = _random_simplex(rng, 5)
    sig = uniform_pair_operator(5)
    grad = ipo_gradient(game, logits, sig, mu)

    target = game.ref_logits + (game.matrix.entries @ mu) / game.beta

    def loss(vec):
        diff = vec - target
        return float(diff @ sig.matrix @ diff)

    h = 1e-6
    for i in range(5):
        e = np.zeros(5)
        e[i] = h
        fd = (loss(logits + e) - loss(logits - e)) / (2 * h)
        denom = max(abs(fd), 1e-12)
        if abs(fd - grad[i]) / denom > 1e-6:
            return f"finite difference mismatch at coordinate {i}"
    return None


def check_gauge_invariance():
    game = _seeded_game(12)
    exact = VectorEstimator.exact()
    rng = RngStream(12, DIAG_STREAM)
    logits = np.asarray(rng.normal(1.0, size=game.n))
    eta, gamma = 0.1, 0.125
    steps = {
        "extragradient": lambda v: extragradient_step(game, v, eta, exact).next_logits,
        "omd": lambda v: omd_step(game, v, eta, exact).next_logits,
        "online_ipo2": lambda v: online_ipo2_step(game, v, eta, exact).next_logits,
        "nash_md": lambda v: nash_md_step(game, v, eta, exact, gamma).next_logits,
        "nash_md_pg": lambda v: nash_md_pg_step(game, v, eta, exact, gamma).next_logits,
        "via_ipo": lambda v: extragradient_step_via_ipo(game, v, eta, exact).next_logits,
    }
    for name, step in steps.items():
        base = softmax(step(logits))
        shifted = softmax(step(logits + 17.25))
        if np.abs(base - shifted).max() > 1e-12:
            return f"{name} is not invariant to constant logit shifts"
    return None


def check_sigma_operators():
    expect2 = np.array([[0.5, -0.5], [-0.5, 0.5]])
    if np.abs(product_pair_operator([0.5, 0.5]).matrix - expect2).max() > 1e-15:
        return "product-pair operator wrong for the uniform two-response case"
    n = 4
    expect4 = (2.0 / 16.0) * (4.0 * np.eye(4) - np.ones((4, 4)))
    if np.abs(uniform_pair_operator(n).matrix - expect4).max() > 1e-15:
        return "uniform-pair operator deviates from its closed form"
    return None


def check_stream_determinism():
    a = RngStream(99, 7)
    b = RngStream(99, 7)
    if not np.array_equal(a.uniform(1000), b.uniform(1000)):
        return "identical streams produced different uniforms"
    if not np.array_equal(a.normal(2.0, 100), b.normal(2.0, 100)):
        return "identical streams produced different normals"
    return None


def unbiasedness_report(n_instances: int = 5, n_samples: int = 10**6):
    """Chunked Monte Carlo means and standard errors vs the exact gradient.

    Returns a list of (max |z|) per instance, where z is the per-coordinate
    deviation in standard errors. Shared by the check and the acceptance
    suite.
    """
    zs = []
    n_chunks = 100
    per_chunk = n_samples // n_chunks
    for seed in range(n_instances):
        game = _seeded_game(seed + 40, n=5, beta=0.2)
        rng = RngStream(seed + 40, DIAG_STREAM)
        logits = np.asarray(rng.normal(1.0, size=5))
        mu = _random_simplex(rng, 5)
        exact = ipo_gradient(game, logits, uniform_pair_operator(5), mu)
        chunks = np.stack(
            [sampled_ipo_gradient(game, logits, mu, per_chunk, rng) for _ in range(n_chunks)]
        )
        mean = chunks.mean(axis=0)
        se = chunks.std(axis=0, ddof=1) / math.sqrt(n_chunks)
        zs.append(float(np.abs((mean - exact) / np.maximum(se, 1e-15)).max()))
    return zs


def check_estimator_unbiasedness():
    zs = unbiasedness_report()
    worst = max(zs)
    if worst > 3.0:
        return f"sampled gradient deviates {worst:.2f} standard errors from exact"
    return None


def check_sampled_convergence_rate():
    game = _seeded_game(21, n=3, beta=0.5)
    pi = softmax(game.ref_logits)
    exact = game.matrix.entries @ pi
    errors = []
    for n_samples in (10**2, 10**4, 10**6):
        # average the max-norm error over independent streams so the
        # 1/sqrt(N) factor is not swamped by single-draw noise
        errs = []
        for rep in range(10):
            est = VectorEstimator.sampled(n_samples, RngStream(21 + rep, DIAG_STREAM))
            errs.append(np.abs(estimate_p_pi(game.matrix, pi, est) - exact).max())
        errors.append(float(np.mean(errs)))
    for big, small in zip(errors, errors[1:]):
        factor = big / max(small, 1e-300)
        if not 5.0 <= factor <= 20.0:
            return f"error shrink factor {factor:.2f} outside [5, 20]"
    return None


def check_noise_diagnostic():
    rng = RngStream(22, DIAG_STREAM)
    mean0, bound0 = inf_norm_square_diagnostic(0.0, 4, 10, rng)
    if mean0 != 0.0 or bound0 != 0.0:
        return "zero-noise diagnostic should be exactly zero"
    mean1, bound1 = inf_norm_square_diagnostic(1.0, 1, 10**5, rng)
    if not (abs(mean1 - 1.0) < 0.05 and mean1 <= bound1):
        return f"scalar case: mean {mean1:.3f} vs bound {bound1:.3f}"
    mean10, bound10 = inf_norm_square_diagnostic(1.0, 10, 10**5, rng)
    if mean10 > bound10:
        return f"dimension 10: mean {mean10:.3f} exceeds bound {bound10:.3f}"
    return None


def check_neural_finite_difference():
    policy = mlp_init(31, 10)
    rng = RngStream(31, DIAG_STREAM)
    upstream = np.asarray(rng.normal(1.0, size=10))
    mlp_forward(policy)
    grads = mlp_backward(policy, upstream)
    h = 1e-6
    params = policy.params()
    grad_arrays = (grads.w1, grads.b1, grads.w2, grads.b2, grads.w3, grads.b3)
    for layer, (p, g) in enumerate(zip(params, grad_arrays)):
        flat_idx = rng.integers(p.size, size=9)
        for idx in np.unique(flat_idx):
            orig = p.flat[idx]
            p.flat[idx] = orig + h
            up = float(upstream @ mlp_forward(policy))
            p.flat[idx] = orig - h
            down = float(upstream @ mlp_forward(policy))
            p.flat[idx] = orig
            fd = (up - down) / (2 * h)
            denom = max(abs(fd), 1e-10)
            if abs(fd - g.flat[idx]) / denom > 1e-5:
                return f"finite-difference mismatch in layer array {layer} index {idx}"
    mlp_forward(policy)
    return None


def check_snapshot_restore():
    policy = mlp_init(32, 10)
    before = mlp_forward(policy).copy()
    snap = snapshot(policy)
    game = _seeded_game(32, n=10, beta=0.1)
    game = GameSpec(game.matrix, before, game.beta)
    neural_step(game, policy, "omd", VectorEstimator.exact(), eta=0.5)
    moved = mlp_forward(policy)
    if np.array_equal(moved, before):
        return "training step had no effect; restore check would be vacuous"
    snap.restore(policy)
    after = mlp_forward(policy)
    if not np.array_equal(after, before):
        return "snapshot/restore is not bit-exact"
    return None


def check_neural_training_progress():
    matrix = random_preference_matrix(33, 10)
    policy = mlp_init(33, 10)
    ref_logits = mlp_forward(policy).copy()
    game = GameSpec(matrix=matrix, ref_logits=ref_logits, beta=0.1)
    est = VectorEstimator.exact()
    initial_gap = regularized_dual_gap(game, softmax(mlp_forward(policy)))
    for _ in range(5000):
        neural_step(game, policy, "extragradient", est, eta=0.75)
    final_gap = regularized_dual_gap(game, softmax(mlp_forward(policy)))
    if final_gap > 0.1 * initial_gap:
        return f"gap only reached {final_gap / initial_gap:.1%} of initial"
    return None


def check_rerun_identity():
    cfg_data = {
        "matrix": {"seed": 5, "n": 6},
        "ref": {"seed": 6},
        "beta": 0.1,
        "algorithms": [
            {
                "algorithm": "extragradient",
                "eta": 0.2,
                "iters": 50,
                "seed": 1,
                "mode": {"kind": "sampled", "n_samples": 16},
                "metric_every": 10,
            }
        ],
    }
    config = harness.parse_config(cfg_data)
    with tempfile.TemporaryDirectory() as tmp:
        a = harness.run_experiment(config, os.path.join(tmp, "a"))
        b = harness.run_experiment(config, os.path.join(tmp, "b"))
        if json.dumps(a[0].identity_dict(), sort_keys=True) != json.dumps(
            b[0].identity_dict(), sort_keys=True
        ):
            return "rerun produced a different record"
        csv_a = open(os.path.join(tmp, "a", "00_extragradient.csv")).read()
        csv_b = open(os.path.join(tmp, "b", "00_extragradient.csv")).read()
        if csv_a != csv_b:
            return "rerun produced different CSV bytes"
    return None


def check_sweep_parallel_equivalence():
    cfg_data = {
        "matrix": {"seed": 9, "n": 5},
        "ref": {"seed": 10},
        "beta": 0.2,
        "algorithms": [
            {"algorithm": "omd", "eta": 0.2, "iters": 40, "seed": 3, "metric_every": 10},
            {"algorithm": "nash_md", "eta": 0.2, "iters": 40, "seed": 4, "metric_every": 10},
        ],
    }
    configs = [harness.parse_config(cfg_data) for _ in range(3)]
    seq = harness.run_sweep(configs, parallelism=1)
    par = harness.run_sweep(configs, parallelism=2)
    if len(seq) != len(par):
        return "sweep record counts differ"
    for a, b in zip(seq, par):
        if json.dumps(a.identity_dict(), sort_keys=True) != json.dumps(
            b.identity_dict(), sort_keys=True
        ):
            return "parallel sweep altered a record"
    return None


CHECKS = (
    ("matrix-construction", check_matrix_construction),
    ("value-antisymmetry", check_value_antisymmetry),
    ("pinsker-envelope", check_pinsker),
    ("gaps-at-equilibrium", check_gaps_at_equilibrium),
    ("oracle-certification", check_oracle_certification),
    ("best-response-dominance", check_best_response_dominance),
    ("solver-fixed-points", check_fixed_points),
    ("gradient-form-equivalence", check_gradient_form_equivalence),
    ("linear-kl-bound", check_linear_kl_bound),
    ("ipo-gradient-finite-difference", check_ipo_gradient_finite_difference),
    ("gauge-invariance", check_gauge_invariance),
    ("sigma-operators", check_sigma_operators),
    ("stream-determinism", check_stream_determinism),
    ("estimator-unbiasedness", check_estimator_unbiasedness),
    ("sampled-convergence-rate", check_sampled_convergence_rate),
    ("noise-diagnostic", check_noise_diagnostic),
    ("neural-finite-difference", check_neural_finite_difference),
    ("neural-snapshot-restore", check_snapshot_restore),
    ("neural-training-progress", check_neural_training_progress),
    ("rerun-identity", check_rerun_identity),
    ("sweep-parallel-equivalence", check_sweep_parallel_equivalence),
)


def run_all(verbose: bool = True) -> bool:
    """Run every check; print one line per property; True if all pass."""
    ok = True
    for name, fn in CHECKS:
        try:
            detail = fn()
        except NashGameError as exc:
            detail = f"raised {type(exc).__name__}: {exc}"
        except AssertionError as exc:
            detail = str(exc)
        if detail is None:
            if verbose:
                print(f"PASS {name}")
        else:
            ok = False
            if verbose:
                print(f"FAIL {name}: {detail}")
    return ok
