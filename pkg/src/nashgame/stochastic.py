"""Randomness sources and preference estimators.

All randomness flows through RngStream, a counter-based Philox generator
keyed by (seed, stream_id). The generator family is pinned: rerunning with
the same key reproduces every draw bit-for-bit on the same numpy install.
Distinct stream ids give independent-quality streams, so concurrent runs
never share state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

_MASK64 = (1 << 64) - 1

# Reserved stream ids; arbitrary but fixed so artifacts are reproducible.
MATRIX_STREAM = 1
REF_STREAM = 2
NOISE_STREAM = 3
NEURAL_STREAM = 4
DIAG_STREAM = 5


@dataclass
class RngStream:
    """Seedable, stream-splittable random source with draw accounting.

    ``draws`` counts scalar variates consumed, which run records report as
    the per-run randomness budget.
    """

    seed: int
    stream_id: int = 0
    draws: int = field(default=0, init=False)

    def __post_init__(self):
        key = ((self.seed & _MASK64) << 64) | (self.stream_id & _MASK64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def uniform(self, size=None) -> np.ndarray | float:
        self.draws += int(np.prod(size)) if size is not None else 1
        return self._gen.random(size)

    def normal(self, scale: float, size=None) -> np.ndarray | float:
        self.draws += int(np.prod(size)) if size is not None else 1
        return self._gen.normal(0.0, scale, size)

    def integers(self, upper: int, size=None) -> np.ndarray | int:
        self.draws += int(np.prod(size)) if size is not None else 1
        return self._gen.integers(0, upper, size)

    def categorical(self, probs: np.ndarray, size: int) -> np.ndarray:
        """Indices sampled from a probability vector via inverse CDF."""
        cdf = np.cumsum(probs)
        u = self.uniform(size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)

    def bernoulli(self, p: float) -> int:
        return int(self.uniform() < p)


def preference_sample(matrix, y: int, y_prime: int, rng: RngStream) -> int:
    """One Bernoulli comparison: 1 if response y beats y_prime this round.

    Draws are independent; comparing (y, y') and (y', y) separately does
    not force complementary outcomes.
    """
    n = matrix.n
    if not (0 <= y < n and 0 <= y_prime < n):
        raise InvalidInputError(f"response index out of range for n={n}")
    return rng.bernoulli(matrix.entries[y, y_prime])


def _sampled_pref_vector(matrix, probs: np.ndarray, n_samples: int, rng: RngStream) -> np.ndarray:
    """Per-coordinate win-rate against opponents drawn from probs.

    Spends n_samples comparisons per coordinate. Draw order is pinned:
    opponents first (row-major), then the comparison uniforms.
    """
    n = matrix.n
    opponents = rng.categorical(probs, size=n * n_samples).reshape(n, n_samples)
    u = rng.uniform((n, n_samples))
    rows = np.arange(n)[:, None]
    wins = u < matrix.entries[rows, opponents]
    return wins.mean(axis=1)


@dataclass
class VectorEstimator:
    """Exact, noise-injected, or sample-estimated preference vectors.

    mode "exact" consumes no randomness; "gaussian" adds i.i.d. centered
    noise with standard deviation sigma per coordinate; "sampled" averages
    n_samples Bernoulli comparisons per coordinate.
    """

    mode: str = "exact"
    sigma: float = 0.0
    n_samples: int = 0
    rng: RngStream | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "gaussian", "sampled"):
            raise InvalidInputError(f"unknown estimator mode {self.mode!r}")
        if self.mode == "gaussian" and self.sigma < 0:
            raise InvalidInputError("sigma must be nonnegative")
        if self.mode == "sampled" and self.n_samples < 1:
            raise InvalidInputError("n_samples must be at least 1")
        if self.mode != "exact" and self.rng is None:
            raise InvalidInputError(f"mode {self.mode!r} requires an RngStream")

    @classmethod
    def exact(cls) -> "VectorEstimator":
        return cls(mode="exact")

    @classmethod
    def gaussian(cls, sigma: float, rng: RngStream) -> "VectorEstimator":
        return cls(mode="gaussian", sigma=sigma, rng=rng)

    @classmethod
    def sampled(cls, n_samples: int, rng: RngStream) -> "VectorEstimator":
        return cls(mode="sampled", n_samples=n_samples, rng=rng)

    @property
    def draws(self) -> int:
        return self.rng.draws if self.rng is not None else 0

    def pref_vector(self, matrix, probs: np.ndarray) -> np.ndarray:
        if self.mode == "exact":
            return matrix.entries @ probs
        if self.mode == "gaussian":
            exact = matrix.entries @ probs
            if self.sigma == 0.0:
                # consume no randomness so sigma=0 is literally exact
                return exact
            return exact + self.rng.normal(self.sigma, size=matrix.n)
        return _sampled_pref_vector(matrix, probs, self.n_samples, self.rng)


def estimate_p_pi(matrix, probs: np.ndarray, estimator: VectorEstimator) -> np.ndarray:
    """Estimated preference vector of each response against policy probs."""
    return estimator.pref_vector(matrix, np.asarray(probs, dtype=np.float64))


def sampled_ipo_gradient(
    game,
    logits: np.ndarray,
    mu: np.ndarray,
    n_samples: int,
    rng: RngStream,
) -> np.ndarray:
    """Monte Carlo gradient of the pairwise squared loss with uniform pairs.

    Each sample draws (y, y') uniformly, an opponent y'' from mu, and two
    independent Bernoulli comparisons; the contribution 2*d*(e_y - e_y')
    uses d = (logits - ref)[y] - (logits - ref)[y'] - (I(y,y'') - I(y',y''))/beta.
    The mean is unbiased for the exact gradient with the uniform-pair
    covariance operator.
    """
    if n_samples < 1:
        raise InvalidInputError("n_samples must be at least 1")
    n = game.matrix.n
    entries = game.matrix.entries
    ys = rng.integers(n, size=n_samples)
    yps = rng.integers(n, size=n_samples)
    opps = rng.categorical(np.asarray(mu, dtype=np.float64), size=n_samples)
    i1 = rng.uniform(n_samples) < entries[ys, opps]
    i2 = rng.uniform(n_samples) < entries[yps, opps]
    delta = logits - game.ref_logits
    d = delta[ys] - delta[yps] - (i1.astype(np.float64) - i2.astype(np.float64)) / game.beta
    pos = np.bincount(ys, weights=d, minlength=n)
    neg = np.bincount(yps, weights=d, minlength=n)
    return (2.0 / n_samples) * (pos - neg)


def inf_norm_square_diagnostic(
    sigma: float, dim: int, n_trials: int, rng: RngStream
) -> tuple[float, float]:
    """Monte Carlo mean of the squared max-norm of centered Gaussian vectors,
    next to the analytic envelope 4 * sigma^2 * log(3 * dim)."""
    if n_trials < 1:
        raise InvalidInputError("n_trials must be at least 1")
    bound = 4.0 * sigma**2 * np.log(3.0 * dim)
    if sigma == 0.0:
        return 0.0, 0.0
    draws = rng.normal(sigma, size=(n_trials, dim))
    empirical = float((np.abs(draws).max(axis=1) ** 2).mean())
    return empirical, float(bound)
