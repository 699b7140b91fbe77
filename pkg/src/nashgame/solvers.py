"""Update rules over tabular policies, in direct and gradient-equivalent form.

Five algorithms share one interface: extragradient (a predictive half-step
followed by a full step using the half-step policy), plain mirror descent
("omd"), the self-play squared-loss update ("online_ipo2"), and the
mixture-opponent pair ("nash_md", "nash_md_pg"). Each exists in exact,
gaussian-noise, and sample-estimated modes via VectorEstimator, and
``extragradient_step_via_ipo`` reproduces the extragradient trajectory
through the gradient of the pairwise squared loss.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from ._kernel import (
    ALG_EXTRAGRADIENT,
    ALG_MIRROR,
    ALG_MIXTURE,
    ALG_PAIR_COV,
    ALG_PG,
    run_exact,
)
from .bounds import theorem_step_size
from .errors import InfiniteDivergenceError, InvalidInputError, NumericBlowupError
from .game import (
    EquilibriumCertificate,
    GameSpec,
    dual_gap,
    equilibrium_residual,
    kl_divergence,
    regularized_dual_gap,
    solve_equilibrium,
)
from .records import MetricRow, RunRecord, is_finite_row
from .stochastic import NOISE_STREAM, RngStream, VectorEstimator
from .updates import (
    mirror_update,
    mixture_logits,
    pair_covariance_update,
    policy_gradient_update,
    softmax,
)

ALGORITHMS = ("extragradient", "omd", "online_ipo2", "nash_md", "nash_md_pg")
MIXTURE_ALGORITHMS = ("nash_md", "nash_md_pg")
LOGIT_ABORT = 1e9

_KERNEL_IDS = {
    "extragradient": ALG_EXTRAGRADIENT,
    "omd": ALG_MIRROR,
    "online_ipo2": ALG_PAIR_COV,
    "nash_md": ALG_MIXTURE,
    "nash_md_pg": ALG_PG,
}


class StepSizeWarning(UserWarning):
    """eta exceeds the range covered by the convergence guarantee."""


@dataclass(frozen=True)
class SolverRunConfig:
    """One solver run: algorithm, step size, update mode, budget, seed."""

    algorithm: str
    eta: float
    iters: int
    seed: int
    mode: str = "exact"
    sigma: float = 0.0
    n_samples: int = 0
    mixture_gamma: float | str = "auto"
    metric_every: int = 1
    record_half: bool = False
    enforce_theorem_step: bool = False
    label: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InvalidInputError(f"unknown algorithm {self.algorithm!r}")
        if not self.eta > 0:
            raise InvalidInputError("eta must be positive")
        if self.iters < 0:
            raise InvalidInputError("iters must be nonnegative")
        if self.mode not in ("exact", "gaussian", "sampled"):
            raise InvalidInputError(f"unknown mode {self.mode!r}")
        if self.mode == "gaussian" and self.sigma < 0:
            raise InvalidInputError("sigma must be nonnegative")
        if self.mode == "sampled" and self.n_samples < 1:
            raise InvalidInputError("sampled mode needs n_samples >= 1")
        if self.metric_every < 1:
            raise InvalidInputError("metric_every must be positive")
        if isinstance(self.mixture_gamma, str):
            if self.mixture_gamma != "auto":
                raise InvalidInputError("mixture_gamma must be a float in [0, 1] or 'auto'")
        elif not 0.0 <= self.mixture_gamma <= 1.0:
            raise InvalidInputError("mixture_gamma must lie in [0, 1]")

    def resolved_gamma(self, beta: float) -> float:
        if self.mixture_gamma == "auto":
            return self.eta * beta
        return float(self.mixture_gamma)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "eta": self.eta,
            "iters": self.iters,
            "seed": self.seed,
            "mode": self.mode,
            "sigma": self.sigma,
            "n_samples": self.n_samples,
            "mixture_gamma": self.mixture_gamma,
            "metric_every": self.metric_every,
            "record_half": self.record_half,
            "enforce_theorem_step": self.enforce_theorem_step,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SolverRunConfig":
        return cls(**data)


@dataclass(frozen=True)
class StepOutcome:
    """Result of one update: new logits, the half-step if one exists, and
    how much randomness the estimates consumed."""

    next_logits: np.ndarray
    half_logits: np.ndarray | None = None
    noise_draws_consumed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.next_logits).all():
            raise NumericBlowupError("non-finite logits after update")
        if self.half_logits is not None and not np.isfinite(self.half_logits).all():
            raise NumericBlowupError("non-finite half-step logits")


@dataclass(frozen=True)
class SigmaOperator:
    """Covariance of indicator differences over a pair distribution.

    Symmetric, positive semidefinite, and annihilates the all-ones vector;
    it converts fixed-point residuals into squared-loss gradients.
    """

    kind: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if np.abs(m - m.T).max() > 1e-10:
            raise InvalidInputError("operator must be symmetric")
        if np.abs(m.sum(axis=1)).max() > 1e-10:
            raise InvalidInputError("operator rows must sum to zero")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise InvalidInputError("operator must be positive semidefinite")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


def uniform_pair_operator(n: int) -> SigmaOperator:
    """Operator for both responses drawn uniformly: (2/n^2) (n I - ones)."""
    m = (2.0 / n**2) * (n * np.eye(n) - np.ones((n, n)))
    return SigmaOperator("uniform_pairs", m)


def product_pair_operator(mu) -> SigmaOperator:
    """Operator for both responses drawn from mu: 2 (diag(mu) - mu mu^T)."""
    mu = np.asarray(mu, dtype=np.float64)
    m = 2.0 * (np.diag(mu) - np.outer(mu, mu))
    return SigmaOperator("product_pairs", m)


def ipo_gradient(game: GameSpec, logits, sigma_op: SigmaOperator, mu) -> np.ndarray:
    """Exact gradient of the pairwise squared loss: 2 Sigma (logits - ref - P mu / beta)."""
    logits = np.asarray(logits, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if logits.shape[0] != game.n or mu.shape[0] != game.n:
        raise InvalidInputError("dimension mismatch")
    v = logits - game.ref_logits - (game.matrix.entries @ mu) / game.beta
    return 2.0 * (sigma_op.matrix @ v)


def _check_step_size(algorithm: str, eta: float, beta: float, enforce: bool) -> None:
    limit = theorem_step_size(beta)
    if algorithm == "extragradient" and eta > limit * (1 + 1e-12):
        if enforce:
            raise InvalidInputError(
                f"eta={eta:g} exceeds the guaranteed range 1/(beta+3)={limit:g}"
            )
        warnings.warn(
            f"eta={eta:g} exceeds 1/(beta+3)={limit:g}; convergence is not guaranteed",
            StepSizeWarning,
            stacklevel=3,
        )


def extragradient_step(
    game: GameSpec, logits, eta: float, estimator: VectorEstimator
) -> StepOutcome:
    """Predictive half-step, then a full step using the half-step policy.

    The two preference estimates consume fresh, independent randomness;
    reusing one batch for both would break the noise-robustness analysis.
    """
    logits = np.asarray(logits, dtype=np.float64)
    before = estimator.draws
    est_now = estimator.pref_vector(game.matrix, softmax(logits))
    half = mirror_update(logits, game.ref_logits, est_now, eta, game.beta)
    est_half = estimator.pref_vector(game.matrix, softmax(half))
    nxt = mirror_update(logits, game.ref_logits, est_half, eta, game.beta)
    return StepOutcome(nxt, half, estimator.draws - before)


def omd_step(game: GameSpec, logits, eta: float, estimator: VectorEstimator) -> StepOutcome:
    """Mirror-descent step toward ref + (est P pi) / beta (the half-step alone)."""
    logits = np.asarray(logits, dtype=np.float64)
    before = estimator.draws
    est = estimator.pref_vector(game.matrix, softmax(logits))
    nxt = mirror_update(logits, game.ref_logits, est, eta, game.beta)
    return StepOutcome(nxt, None, estimator.draws - before)


def online_ipo2_step(
    game: GameSpec, logits, eta: float, estimator: VectorEstimator
) -> StepOutcome:
    """Self-play squared-loss update (variance-reduced in sampled mode).

    Sampled mode draws comparison pairs from the current policy and uses the
    single Bernoulli outcome against the 1/2 baseline as the target.
    """
    logits = np.asarray(logits, dtype=np.float64)
    probs = softmax(logits)
    before = estimator.draws
    n = game.n
    if estimator.mode == "sampled":
        rng = estimator.rng
        ns = estimator.n_samples
        ys = rng.categorical(probs, size=ns)
        yps = rng.categorical(probs, size=ns)
        wins = rng.uniform(ns) < game.matrix.entries[ys, yps]
        delta = logits - game.ref_logits
        d = delta[ys] - delta[yps] - (wins.astype(np.float64) - 0.5) / game.beta
        grad = (2.0 / ns) * (
            np.bincount(ys, weights=d, minlength=n) - np.bincount(yps, weights=d, minlength=n)
        )
        nxt = logits - (eta * game.beta * n / 4.0) * grad
    else:
        est = estimator.pref_vector(game.matrix, probs)
        nxt = pair_covariance_update(logits, game.ref_logits, probs, est, eta, game.beta)
    return StepOutcome(nxt, None, estimator.draws - before)


def nash_md_step(
    game: GameSpec, logits, eta: float, estimator: VectorEstimator, gamma: float
) -> StepOutcome:
    """Mirror-descent step against the geometric mixture opponent."""
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError("gamma must lie in [0, 1]")
    logits = np.asarray(logits, dtype=np.float64)
    before = estimator.draws
    tilde = softmax(mixture_logits(logits, game.ref_logits, gamma))
    est = estimator.pref_vector(game.matrix, tilde)
    nxt = mirror_update(logits, game.ref_logits, est, eta, game.beta)
    return StepOutcome(nxt, None, estimator.draws - before)


def nash_md_pg_step(
    game: GameSpec, logits, eta: float, estimator: VectorEstimator, gamma: float
) -> StepOutcome:
    """Score-function step on the mixture-opponent objective.

    Sampled mode approximates the expectation with paired draws: a response
    from the current policy and an opponent from the mixture, scored by one
    Bernoulli comparison.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError("gamma must lie in [0, 1]")
    logits = np.asarray(logits, dtype=np.float64)
    probs = softmax(logits)
    before = estimator.draws
    tilde = softmax(mixture_logits(logits, game.ref_logits, gamma))
    if estimator.mode == "sampled":
        rng = estimator.rng
        ns = estimator.n_samples
        ys = rng.categorical(probs, size=ns)
        opps = rng.categorical(tilde, size=ns)
        wins = (rng.uniform(ns) < game.matrix.entries[ys, opps]).astype(np.float64)
        logratio = np.log(probs) - np.log(game.ref_probs())
        coef = wins - game.beta * logratio[ys]
        direction = np.bincount(ys, weights=coef, minlength=game.n) / ns - (
            coef.mean() * probs
        )
        nxt = logits + eta * direction
    else:
        est = estimator.pref_vector(game.matrix, tilde)
        nxt = policy_gradient_update(logits, game.ref_logits, probs, est, eta, game.beta)
    return StepOutcome(nxt, None, estimator.draws - before)


def extragradient_step_via_ipo(
    game: GameSpec, logits, eta: float, estimator: VectorEstimator
) -> StepOutcome:
    """Extragradient implemented as two squared-loss gradient steps.

    The optimizer learning rate eta * beta * n / 4 composed with the
    uniform-pair operator reproduces the direct update up to a constant
    logit shift, so softmax trajectories coincide.
    """
    logits = np.asarray(logits, dtype=np.float64)
    before = estimator.draws
    n = game.n
    lr = eta * game.beta * n / 4.0
    sig = uniform_pair_operator(n)

    est_now = estimator.pref_vector(game.matrix, softmax(logits))
    v_now = logits - game.ref_logits - est_now / game.beta
    half = logits - lr * (2.0 * (sig.matrix @ v_now))
    est_half = estimator.pref_vector(game.matrix, softmax(half))
    v_half = logits - game.ref_logits - est_half / game.beta
    nxt = logits - lr * (2.0 * (sig.matrix @ v_half))
    return StepOutcome(nxt, half, estimator.draws - before)


def make_estimator(config: SolverRunConfig) -> VectorEstimator:
    """Estimator for a run, with its own noise stream derived from the seed."""
    if config.mode == "exact":
        return VectorEstimator.exact()
    rng = RngStream(config.seed, NOISE_STREAM)
    if config.mode == "gaussian":
        return VectorEstimator.gaussian(config.sigma, rng)
    return VectorEstimator.sampled(config.n_samples, rng)


def step_function(config: SolverRunConfig, game: GameSpec):
    """Bind a config to a callable logits -> StepOutcome."""
    est = make_estimator(config)
    gamma = config.resolved_gamma(game.beta)
    alg = config.algorithm
    if alg == "extragradient":
        return lambda logits: extragradient_step(game, logits, config.eta, est), est
    if alg == "omd":
        return lambda logits: omd_step(game, logits, config.eta, est), est
    if alg == "online_ipo2":
        return lambda logits: online_ipo2_step(game, logits, config.eta, est), est
    if alg == "nash_md":
        return lambda logits: nash_md_step(game, logits, config.eta, est, gamma), est
    return lambda logits: nash_md_pg_step(game, logits, config.eta, est, gamma), est


def _kl_or_inf(p: np.ndarray, q: np.ndarray) -> float:
    # metric rows must stay total: a policy that underflowed to exact zeros
    # reports an infinite divergence, which flags the run as diverged
    try:
        return kl_divergence(p, q)
    except InfiniteDivergenceError:
        return float("inf")


def metric_row(
    game: GameSpec, certificate: EquilibriumCertificate, logits: np.ndarray, t: int
) -> MetricRow:
    star = certificate.probs()
    pi = softmax(logits)
    return MetricRow(
        iter=t,
        kl_star_pi=_kl_or_inf(star, pi),
        kl_pi_star=_kl_or_inf(pi, star),
        dualgap_beta=regularized_dual_gap(game, pi),
        dualgap=dual_gap(game.matrix, pi),
        residual=equilibrium_residual(game, logits),
    )


def run_solver(
    game: GameSpec,
    config: SolverRunConfig,
    initial_logits=None,
    certificate: EquilibriumCertificate | None = None,
    qre_tol: float = 1e-12,
) -> RunRecord:
    """Iterate one configured algorithm and record metrics along the way.

    Exact-mode runs that do not record half-iterates advance through the
    compiled kernel in metric-sized chunks; all other runs take explicit
    per-step updates. A numeric blow-up (non-finite metric or |logit|
    beyond 1e9) stops the run and flags the partial record.
    """
    _check_step_size(config.algorithm, config.eta, game.beta, config.enforce_theorem_step)
    start = time.perf_counter()
    if certificate is None:
        certificate = solve_equilibrium(game, tol=qre_tol)
    logits = (
        game.ref_logits.copy()
        if initial_logits is None
        else np.asarray(initial_logits, dtype=np.float64).copy()
    )
    gamma = config.resolved_gamma(game.beta)
    kernel_gamma = gamma if config.algorithm in MIXTURE_ALGORITHMS else 0.0
    echo = config.to_dict()
    echo["mixture_gamma"] = kernel_gamma

    rows = [metric_row(game, certificate, logits, 0)]
    half_rows: list[MetricRow] = []
    status, error = "ok", None
    draws = 0

    fast_path = config.mode == "exact" and not config.record_half
    stepper, est = (None, None) if fast_path else step_function(config, game)

    t = 0
    while t < config.iters:
        try:
            if fast_path:
                chunk = min(config.metric_every - (t % config.metric_every), config.iters - t)
                run_exact(
                    _KERNEL_IDS[config.algorithm],
                    game.matrix.entries,
                    game.ref_logits,
                    game.beta,
                    config.eta,
                    kernel_gamma,
                    logits,
                    chunk,
                )
                t += chunk
            else:
                outcome = stepper(logits)
                draws += outcome.noise_draws_consumed
                t += 1
                if config.record_half and outcome.half_logits is not None:
                    half_rows.append(
                        metric_row(game, certificate, outcome.half_logits, t)
                    )
                logits = outcome.next_logits
            if not np.isfinite(logits).all() or np.abs(logits).max() > LOGIT_ABORT:
                raise NumericBlowupError("logits left the representable range", iteration=t)
        except NumericBlowupError as exc:
            status, error = "diverged", f"{exc} at iteration {t}"
            break
        if t % config.metric_every == 0 or t == config.iters:
            row = metric_row(game, certificate, logits, t)
            rows.append(row)
            if not is_finite_row(row):
                status, error = "diverged", f"non-finite metric at iteration {t}"
                break

    return RunRecord(
        config=echo,
        certificate=certificate.to_dict(),
        rows=rows,
        half_rows=half_rows,
        final_logits=[float(x) for x in logits],
        status=status,
        error=error,
        rng_draws=draws,
        wall_clock_s=time.perf_counter() - start,
    )
