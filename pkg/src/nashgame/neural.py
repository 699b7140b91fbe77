"""A small MLP policy trained by the logit-space gradients of each algorithm.

The network is three linear layers (hidden width 10) with ReLU between
them, evaluated on a single frozen Gaussian input vector, so its output is
a logit vector over the n responses. Backpropagation is hand-rolled, and
the two-evaluation extragradient update relies on exact parameter
snapshot/restore.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericBlowupError
from .game import GameSpec
from .stochastic import NEURAL_STREAM, RngStream, VectorEstimator
from .updates import mixture_logits, softmax

INPUT_DIM = 10
HIDDEN_DIM = 10

NEURAL_ALGORITHMS = ("extragradient", "omd", "online_ipo2", "nash_md")


@dataclass
class MlpGradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def is_finite(self) -> bool:
        return all(
            np.isfinite(a).all() for a in (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)
        )


class MlpPolicy:
    """Mutable MLP parameters plus the frozen input vector.

    The input is drawn once at initialization and never resampled; a fresh
    draw per forward pass would make outputs non-reproducible functions of
    the parameters.
    """

    def __init__(self, w1, b1, w2, b2, w3, b3, input_vec):
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)
        self.w3 = np.asarray(w3, dtype=np.float64)
        self.b3 = np.asarray(b3, dtype=np.float64)
        self.input_vec = np.asarray(input_vec, dtype=np.float64).copy()
        self.input_vec.flags.writeable = False
        self._cache = None

    @property
    def n_arms(self) -> int:
        return self.w3.shape[0]

    def params(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "MlpPolicy":
        return MlpPolicy(*(p.copy() for p in self.params()), self.input_vec)

    def to_dict(self) -> dict:
        return {
            "layout": [list(p.shape) for p in self.params()],
            "n_arms": self.n_arms,
            "input_vec": [float(x) for x in self.input_vec],
            "params": [float(x) for p in self.params() for x in p.ravel()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpPolicy":
        flat = np.asarray(data["params"], dtype=np.float64)
        total = sum(int(np.prod(shape)) for shape in data["layout"])
        if total != flat.size:
            raise InvalidInputError("parameter payload does not match the layout")
        arrays = []
        offset = 0
        for shape in data["layout"]:
            size = int(np.prod(shape))
            arrays.append(flat[offset : offset + size].reshape(shape))
            offset += size
        return cls(*arrays, np.asarray(data["input_vec"], dtype=np.float64))


@dataclass(frozen=True)
class ParamSnapshot:
    """Flat copy of all parameters; restore() is a bit-exact inverse."""

    flat: np.ndarray

    @classmethod
    def take(cls, policy: MlpPolicy) -> "ParamSnapshot":
        flat = np.concatenate([p.ravel() for p in policy.params()]).copy()
        flat.flags.writeable = False
        return cls(flat)

    def restore(self, policy: MlpPolicy) -> None:
        offset = 0
        for p in policy.params():
            p[...] = self.flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        policy._cache = None


def snapshot(policy: MlpPolicy) -> ParamSnapshot:
    return ParamSnapshot.take(policy)


def restore(policy: MlpPolicy, snap: ParamSnapshot) -> None:
    snap.restore(policy)


def _xavier(rng: RngStream, fan_out: int, fan_in: int) -> np.ndarray:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return np.asarray(rng.normal(std, size=(fan_out, fan_in)), dtype=np.float64)


def mlp_init(seed: int, n_arms: int) -> MlpPolicy:
    """Xavier-normal weights, zero biases, one frozen standard-normal input."""
    if n_arms < 2:
        raise InvalidInputError("n_arms must be at least 2")
    rng = RngStream(seed, NEURAL_STREAM)
    w1 = _xavier(rng, HIDDEN_DIM, INPUT_DIM)
    w2 = _xavier(rng, HIDDEN_DIM, HIDDEN_DIM)
    w3 = _xavier(rng, n_arms, HIDDEN_DIM)
    input_vec = rng.normal(1.0, size=INPUT_DIM)
    return MlpPolicy(
        w1, np.zeros(HIDDEN_DIM), w2, np.zeros(HIDDEN_DIM), w3, np.zeros(n_arms), input_vec
    )


def mlp_forward(policy: MlpPolicy) -> np.ndarray:
    """Logits on the frozen input; activations are cached for the backward pass."""
    x = policy.input_vec
    z1 = policy.w1 @ x + policy.b1
    a1 = np.maximum(z1, 0.0)
    z2 = policy.w2 @ a1 + policy.b2
    a2 = np.maximum(z2, 0.0)
    logits = policy.w3 @ a2 + policy.b3
    policy._cache = (z1, a1, z2, a2)
    return logits


def mlp_backward(policy: MlpPolicy, upstream: np.ndarray) -> MlpGradients:
    """Gradients of upstream . logits for every parameter.

    Requires a matching forward call; the ReLU subgradient at 0 is 0.
    """
    if policy._cache is None:
        raise InvalidInputError("backward requires a preceding forward pass")
    z1, a1, z2, a2 = policy._cache
    upstream = np.asarray(upstream, dtype=np.float64)
    gw3 = np.outer(upstream, a2)
    gb3 = upstream.copy()
    da2 = policy.w3.T @ upstream
    dz2 = da2 * (z2 > 0.0)
    gw2 = np.outer(dz2, a1)
    gb2 = dz2
    da1 = policy.w2.T @ dz2
    dz1 = da1 * (z1 > 0.0)
    gw1 = np.outer(dz1, policy.input_vec)
    gb1 = dz1
    return MlpGradients(gw1, gb1, gw2, gb2, gw3, gb3)


def _logit_space_gradient(
    game: GameSpec,
    logits: np.ndarray,
    mu: np.ndarray,
    pair_dist: str,
    estimator: VectorEstimator,
) -> np.ndarray:
    """2 Sigma(pair_dist) (logits - ref - est(P mu) / beta) in closed form."""
    n = game.n
    est = estimator.pref_vector(game.matrix, mu)
    v = logits - game.ref_logits - est / game.beta
    if pair_dist == "uniform":
        return (4.0 / n) * (v - v.mean())
    probs = softmax(logits)
    w = probs * v
    return 4.0 * (w - probs * w.sum())


def _apply(policy: MlpPolicy, grads: MlpGradients, lr: float) -> None:
    if not grads.is_finite():
        raise NumericBlowupError("non-finite parameter gradient")
    policy.w1 -= lr * grads.w1
    policy.b1 -= lr * grads.b1
    policy.w2 -= lr * grads.w2
    policy.b2 -= lr * grads.b2
    policy.w3 -= lr * grads.w3
    policy.b3 -= lr * grads.b3
    policy._cache = None


def neural_step(
    game: GameSpec,
    policy: MlpPolicy,
    algorithm: str,
    estimator: VectorEstimator,
    eta: float,
    gamma: float | str = "auto",
) -> MlpPolicy:
    """One training step: backpropagate the algorithm's logit-space gradient
    and descend with learning rate eta * beta * n / 4.

    The extragradient variant snapshots parameters, takes the half-step to
    read the intermediate policy, restores, and applies the full step.
    """
    if algorithm not in NEURAL_ALGORITHMS:
        raise InvalidInputError(f"unsupported neural algorithm {algorithm!r}")
    if gamma == "auto":
        gamma = eta * game.beta
    lr = eta * game.beta * game.n / 4.0

    logits = mlp_forward(policy)
    probs = softmax(logits)

    if algorithm == "extragradient":
        snap = ParamSnapshot.take(policy)
        g_half = _logit_space_gradient(game, logits, probs, "uniform", estimator)
        _apply(policy, mlp_backward(policy, g_half), lr)
        probs_half = softmax(mlp_forward(policy))
        snap.restore(policy)
        logits = mlp_forward(policy)
        g_full = _logit_space_gradient(game, logits, probs_half, "uniform", estimator)
        _apply(policy, mlp_backward(policy, g_full), lr)
        return policy

    if algorithm == "omd":
        g = _logit_space_gradient(game, logits, probs, "uniform", estimator)
    elif algorithm == "online_ipo2":
        g = _logit_space_gradient(game, logits, probs, "product", estimator)
    else:
        tilde = softmax(mixture_logits(logits, game.ref_logits, float(gamma)))
        g = _logit_space_gradient(game, logits, tilde, "uniform", estimator)
    _apply(policy, mlp_backward(policy, g), lr)
    return policy
