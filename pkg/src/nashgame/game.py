"""Preference matrices, softmax policies, values, gaps, and the equilibrium oracle.

A preference matrix P holds pairwise win probabilities with P + P^T = 1 and
a 0.5 diagonal, which makes V(p, q) = p^T P q a constant-sum game. Adding
KL regularization toward a reference policy with coefficient beta turns the
unique equilibrium into the solution of

    logits = ref_logits + (P @ probs(logits)) / beta

and everything downstream (solvers, metrics, acceptance gates) is measured
against a residual-certified solution of that equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernel import ALG_EXTRAGRADIENT, run_exact
from .errors import ConvergenceError, InfiniteDivergenceError, InvalidInputError
from .stochastic import MATRIX_STREAM, REF_STREAM, RngStream
from .updates import logsumexp, mixture_logits, softmax

PAIR_SUM_TOL = 1e-12


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    return v


@dataclass(frozen=True)
class PreferenceMatrix:
    """Pairwise win-probability matrix; entry (y, y') is P(y beats y')."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] < 2:
            raise InvalidInputError("entries must be a square matrix with n >= 2")
        if not np.isfinite(e).all():
            raise InvalidInputError("entries must be finite")
        if e.min() < 0.0 or e.max() > 1.0:
            raise InvalidInputError("entries must lie in [0, 1]")
        if np.abs(e + e.T - 1.0).max() > PAIR_SUM_TOL:
            raise InvalidInputError("entries must satisfy P[y, y'] + P[y', y] = 1")
        if np.any(np.diag(e) != 0.5):
            raise InvalidInputError("diagonal entries must equal 0.5 exactly")
        e = e.copy()
        e.flags.writeable = False
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def to_dict(self) -> dict:
        return {"n": self.n, "entries": [float(x) for x in self.entries.ravel()]}

    @classmethod
    def from_dict(cls, data: dict) -> "PreferenceMatrix":
        n = int(data["n"])
        flat = np.asarray(data["entries"], dtype=np.float64)
        if flat.size != n * n:
            raise InvalidInputError(f"expected {n * n} entries, got {flat.size}")
        return cls(flat.reshape(n, n))


def random_preference_matrix(seed: int, n: int) -> PreferenceMatrix:
    """Matrix with the lower triangle i.i.d. uniform on [0, 1], deterministic per seed."""
    if n < 2:
        raise InvalidInputError("n must be at least 2")
    rng = RngStream(seed, MATRIX_STREAM)
    entries = np.full((n, n), 0.5)
    lower = np.tril_indices(n, k=-1)
    entries[lower] = rng.uniform(len(lower[0]))
    upper = np.triu_indices(n, k=1)
    entries[upper] = 1.0 - entries.T[upper]
    return PreferenceMatrix(entries)


def random_ref_logits(seed: int, n: int) -> np.ndarray:
    """Reference logits drawn i.i.d. standard normal, deterministic per seed."""
    rng = RngStream(seed, REF_STREAM)
    return np.asarray(rng.normal(1.0, size=n), dtype=np.float64)


@dataclass(frozen=True)
class TabularPolicy:
    """A softmax policy over n responses, stored as raw logits.

    Logits are gauge-redundant (adding a constant leaves the policy
    unchanged), so equality of policies is checked on probabilities.
    """

    logits: np.ndarray

    def __post_init__(self):
        v = _as_vector(self.logits, "logits")
        if not np.isfinite(v).all():
            raise InvalidInputError("logits must be finite")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "logits", v)

    @property
    def n(self) -> int:
        return self.logits.shape[0]

    def probs(self) -> np.ndarray:
        return softmax(self.logits)


def policy_probs(logits) -> np.ndarray:
    """Softmax probabilities of a logit vector (overflow-safe)."""
    v = _as_vector(logits, "logits")
    if not np.isfinite(v).all():
        raise InvalidInputError("logits must be finite")
    return softmax(v)


@dataclass(frozen=True)
class GameSpec:
    """A regularized game: preference matrix, reference logits, coefficient beta."""

    matrix: PreferenceMatrix
    ref_logits: np.ndarray
    beta: float

    def __post_init__(self):
        ref = _as_vector(self.ref_logits, "ref_logits")
        if not np.isfinite(ref).all():
            raise InvalidInputError("ref_logits must be finite")
        if ref.shape[0] != self.matrix.n:
            raise InvalidInputError("ref_logits length must match the matrix size")
        if not self.beta > 0:
            raise InvalidInputError("beta must be positive")
        ref = ref.copy()
        ref.flags.writeable = False
        object.__setattr__(self, "ref_logits", ref)

    @property
    def n(self) -> int:
        return self.matrix.n

    def ref_probs(self) -> np.ndarray:
        return softmax(self.ref_logits)


@dataclass(frozen=True)
class EquilibriumCertificate:
    """A candidate equilibrium validated by its fixed-point residual."""

    logits: np.ndarray
    residual_inf_norm: float
    tolerance: float

    def __post_init__(self):
        v = _as_vector(self.logits, "logits")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "logits", v)
        if not (self.residual_inf_norm <= self.tolerance):
            raise InvalidInputError(
                f"residual {self.residual_inf_norm:g} exceeds tolerance {self.tolerance:g}"
            )

    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    def to_dict(self) -> dict:
        return {
            "logits": [float(x) for x in self.logits],
            "residual_inf_norm": float(self.residual_inf_norm),
            "tolerance": float(self.tolerance),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EquilibriumCertificate":
        return cls(
            logits=np.asarray(data["logits"], dtype=np.float64),
            residual_inf_norm=float(data["residual_inf_norm"]),
            tolerance=float(data["tolerance"]),
        )


def kl_divergence(p, q) -> float:
    """KL(p || q) with the convention 0 * log(0 / q) = 0."""
    p = _as_vector(p, "p")
    q = _as_vector(q, "q")
    if p.shape != q.shape:
        raise InvalidInputError("p and q must have the same length")
    if p.min() < -1e-12 or q.min() < -1e-12:
        raise InvalidInputError("probability vectors must be nonnegative")
    support = p > 0
    if np.any(q[support] == 0.0):
        raise InfiniteDivergenceError("q has zero mass where p is positive")
    ps = p[support]
    return float(np.sum(ps * np.log(ps / q[support])))


def value(matrix: PreferenceMatrix, pi1, pi2) -> float:
    """Expected win probability of pi1 against pi2: pi1^T P pi2."""
    p1 = _as_vector(pi1, "pi1")
    p2 = _as_vector(pi2, "pi2")
    if p1.shape[0] != matrix.n or p2.shape[0] != matrix.n:
        raise InvalidInputError("policy dimension does not match the matrix")
    return float(p1 @ matrix.entries @ p2)


def regularized_value(game: GameSpec, pi1, pi2) -> float:
    """Game value with a KL penalty for pi1 and a KL bonus for pi2."""
    ref = game.ref_probs()
    return (
        value(game.matrix, pi1, pi2)
        - game.beta * kl_divergence(pi1, ref)
        + game.beta * kl_divergence(pi2, ref)
    )


def best_response(game: GameSpec, pi, side: str) -> tuple[TabularPolicy, float]:
    """Optimal regularized response to pi, with the attained value.

    side="max" maximizes over the first argument of the regularized value;
    side="min" minimizes over the second. Both reduce to a log-partition
    evaluated with a stable log-sum-exp.
    """
    if game.beta <= 0:
        raise InvalidInputError("beta must be positive")
    p = _as_vector(pi, "pi")
    pref = game.ref_probs()
    lse_ref = logsumexp(game.ref_logits)
    kl_term = game.beta * kl_divergence(p, pref)
    if side == "max":
        score = game.matrix.entries @ p
        br = game.ref_logits + score / game.beta
        val = game.beta * (logsumexp(br) - lse_ref) + kl_term
    elif side == "min":
        score = game.matrix.entries.T @ p
        br = game.ref_logits - score / game.beta
        val = -game.beta * (logsumexp(br) - lse_ref) - kl_term
    else:
        raise InvalidInputError("side must be 'max' or 'min'")
    return TabularPolicy(br), float(val)


def dual_gap(matrix: PreferenceMatrix, pi) -> float:
    """Exploitability in the unregularized game.

    Both optima are attained at pure responses, so the gap is
    max_y (P pi)_y - min_y (P^T pi)_y. Ties break toward the first index,
    which never affects the value.
    """
    p = _as_vector(pi, "pi")
    if p.shape[0] != matrix.n:
        raise InvalidInputError("policy dimension does not match the matrix")
    return float((matrix.entries @ p).max() - (matrix.entries.T @ p).min())


def regularized_dual_gap(game: GameSpec, pi) -> float:
    """Exploitability in the regularized game, via the two best responses."""
    _, hi = best_response(game, pi, "max")
    _, lo = best_response(game, pi, "min")
    return hi - lo


def equilibrium_residual(game: GameSpec, logits, mixture_gamma: float = 0.0) -> float:
    """Max-norm residual of the fixed-point equation at the given logits.

    With mixture_gamma > 0 the opponent is the geometric mixture of the
    current policy with the reference, which is the fixed-point map of the
    mixture-opponent solvers rather than the plain equilibrium.
    """
    v = _as_vector(logits, "logits")
    probs = softmax(mixture_logits(v, game.ref_logits, mixture_gamma))
    residual = v - game.ref_logits - (game.matrix.entries @ probs) / game.beta
    return float(np.abs(residual).max())


def _residual_vector(game: GameSpec, logits: np.ndarray, gamma: float) -> np.ndarray:
    probs = softmax(mixture_logits(logits, game.ref_logits, gamma))
    return logits - game.ref_logits - (game.matrix.entries @ probs) / game.beta


def _polish(
    game: GameSpec,
    theta: np.ndarray,
    gamma: float,
    tol: float,
    budget: int,
) -> tuple[np.ndarray, float]:
    """Compensated refinement near the fixed point.

    Logits scale like 1/beta, so per-step increments eta*beta*residual can
    round away against them and the plain iteration stalls around an ulp.
    Accumulating the movement in a separate small delta keeps sub-ulp
    progress until it amounts to a representable change.
    """
    eta_beta = game.beta / (game.beta + 3.0)
    anchor = theta.copy()
    delta = np.zeros_like(theta)
    best = theta.copy()
    best_res = float(np.abs(_residual_vector(game, theta, gamma)).max())
    for _ in range(budget):
        point = anchor + delta
        r = _residual_vector(game, point, gamma)
        res = float(np.abs(r).max())
        if res < best_res:
            best_res = res
            best = point.copy()
            if best_res <= tol:
                break
        half = point - eta_beta * r
        delta = delta - eta_beta * _residual_vector(game, half, gamma)
    return best, best_res


def solve_equilibrium(
    game: GameSpec,
    tol: float = 1e-12,
    max_iters: int = 10**6,
    initial_logits=None,
    mixture_gamma: float = 0.0,
) -> EquilibriumCertificate:
    """Residual-certified solve of the equilibrium fixed-point equation.

    The iteration (an extragradient scheme with the canonical step size)
    is only a means of producing a candidate; validity is judged purely by
    the residual, and uniqueness of the solution makes any certified answer
    the equilibrium. Raises ConvergenceError carrying the best residual if
    the budget runs out or progress stalls above tolerance.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    if max_iters < 1:
        raise InvalidInputError("max_iters must be positive")
    eta = 1.0 / (game.beta + 3.0)
    theta = (
        game.ref_logits.copy()
        if initial_logits is None
        else _as_vector(initial_logits, "initial_logits").copy()
    )
    best = theta.copy()
    best_res = equilibrium_residual(game, theta, mixture_gamma)
    if best_res <= tol:
        return EquilibriumCertificate(best, best_res, tol)
    # checking the residual roughly every quarter of a contraction time
    chunk = int(min(max(0.25 / (eta * game.beta), 32), 20000))
    done = 0
    stalled = 0
    while done < max_iters:
        steps = min(chunk, max_iters - done)
        run_exact(
            ALG_EXTRAGRADIENT,
            game.matrix.entries,
            game.ref_logits,
            game.beta,
            eta,
            mixture_gamma,
            theta,
            steps,
        )
        done += steps
        res = equilibrium_residual(game, theta, mixture_gamma)
        if not np.isfinite(res):
            break
        if res < best_res:
            stalled = 0 if res < 0.9 * best_res else stalled + 1
            best_res = res
            best = theta.copy()
        else:
            stalled += 1
        if best_res <= tol:
            return EquilibriumCertificate(best, best_res, tol)
        if stalled >= 50:
            break
    # the chunked loop quantizes increments at the logit scale; a short
    # compensated phase can close the last few ulps toward the tolerance
    if np.isfinite(best_res) and best_res <= max(1e6 * tol, 1e-6):
        best, best_res = _polish(game, best, mixture_gamma, tol, budget=4000)
        if best_res <= tol:
            return EquilibriumCertificate(best, best_res, tol)
    raise ConvergenceError(
        f"no certificate at tolerance {tol:g} after {done} iterations "
        f"(best residual {best_res:g})",
        best_residual=best_res,
        iterations=done,
    )
