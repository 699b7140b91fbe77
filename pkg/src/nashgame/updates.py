"""Shared numerical primitives for logit-space updates.

These helpers are the single source of truth for the update formulas used by
both the pure-python solver loop and the step functions; the compiled kernel
re-implements the same arithmetic in C (see nashgame/_kernel/_fast.pyx) and
is held to agreement by the backend parity tests.
"""

from __future__ import annotations

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    """Probabilities of a logit vector, computed with max-subtraction."""
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def logsumexp(v: np.ndarray) -> float:
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def centered(logits: np.ndarray) -> np.ndarray:
    """Mean-centered logits; the canonical gauge for comparing parameters."""
    return logits - logits.mean()


def mixture_logits(logits: np.ndarray, ref_logits: np.ndarray, gamma: float) -> np.ndarray:
    """Logits of the geometric mixture pi^(1-gamma) * pi_ref^gamma."""
    return (1.0 - gamma) * logits + gamma * ref_logits


def mirror_update(
    logits: np.ndarray,
    ref_logits: np.ndarray,
    pref_vec: np.ndarray,
    eta: float,
    beta: float,
) -> np.ndarray:
    """One mirror-descent-style step toward ref_logits + pref_vec / beta.

    pref_vec is the (possibly estimated) preference vector of the opponent
    policy, i.e. the matrix-vector product P @ probs plus any noise.
    """
    eta_beta = eta * beta
    return (1.0 - eta_beta) * logits + eta_beta * (ref_logits + pref_vec / beta)


def pair_covariance_update(
    logits: np.ndarray,
    ref_logits: np.ndarray,
    probs: np.ndarray,
    pref_vec: np.ndarray,
    eta: float,
    beta: float,
) -> np.ndarray:
    """Exact step of the self-play squared-loss update.

    The gradient of the squared pairwise-logit loss with both comparison
    responses drawn from the current policy is 4 * (diag(p) - p p^T) @ v with
    v = logits - ref_logits - pref_vec / beta; the optimizer learning rate
    eta * beta * n / 4 folds into an overall eta * beta * n factor.
    """
    n = logits.shape[0]
    v = logits - ref_logits - pref_vec / beta
    w = probs * v
    proj = w - probs * w.sum()
    return logits - (eta * beta * n) * proj


def policy_gradient_update(
    logits: np.ndarray,
    ref_logits: np.ndarray,
    probs: np.ndarray,
    pref_tilde: np.ndarray,
    eta: float,
    beta: float,
) -> np.ndarray:
    """Score-function ascent step on the regularized inner objective.

    pref_tilde holds the preference of each response against the opponent
    policy; the advantage subtracts beta times the log-ratio to the
    reference policy, and the tabular score function is (e_y - probs).
    """
    logratio = (logits - logsumexp(logits)) - (ref_logits - logsumexp(ref_logits))
    adv = pref_tilde - beta * logratio
    w = probs * adv
    return logits + eta * (w - w.sum() * probs)
