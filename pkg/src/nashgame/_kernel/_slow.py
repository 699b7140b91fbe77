"""Numpy implementation of the exact-update inner loop.

Mirrors the arithmetic of the compiled kernel; logits are advanced in
place. Only exact (noise-free) updates run here — stochastic modes go
through the per-step functions in nashgame.solvers.
"""

from __future__ import annotations

import numpy as np

from ..updates import (
    mirror_update,
    mixture_logits,
    pair_covariance_update,
    policy_gradient_update,
    softmax,
)

ALG_EXTRAGRADIENT = 0
ALG_MIRROR = 1
ALG_PAIR_COV = 2
ALG_MIXTURE = 3
ALG_PG = 4


def run_exact(
    alg: int,
    pref: np.ndarray,
    ref_logits: np.ndarray,
    beta: float,
    eta: float,
    gamma: float,
    logits: np.ndarray,
    n_steps: int,
) -> None:
    """Advance `logits` by n_steps exact updates of the chosen algorithm.

    gamma is the geometric-mixture weight toward the reference policy; it
    is consulted by the mixture-opponent algorithms and, for the
    extragradient map, lets the equilibrium oracle target mixture fixed
    points (gamma = 0 recovers the plain update).
    """
    for _ in range(n_steps):
        if alg == ALG_EXTRAGRADIENT:
            opp = softmax(mixture_logits(logits, ref_logits, gamma)) if gamma else softmax(logits)
            half = mirror_update(logits, ref_logits, pref @ opp, eta, beta)
            opp_half = softmax(mixture_logits(half, ref_logits, gamma)) if gamma else softmax(half)
            logits[:] = mirror_update(logits, ref_logits, pref @ opp_half, eta, beta)
        elif alg == ALG_MIRROR:
            probs = softmax(logits)
            logits[:] = mirror_update(logits, ref_logits, pref @ probs, eta, beta)
        elif alg == ALG_PAIR_COV:
            probs = softmax(logits)
            logits[:] = pair_covariance_update(
                logits, ref_logits, probs, pref @ probs, eta, beta
            )
        elif alg == ALG_MIXTURE:
            tilde = softmax(mixture_logits(logits, ref_logits, gamma))
            logits[:] = mirror_update(logits, ref_logits, pref @ tilde, eta, beta)
        elif alg == ALG_PG:
            probs = softmax(logits)
            tilde = softmax(mixture_logits(logits, ref_logits, gamma))
            logits[:] = policy_gradient_update(
                logits, ref_logits, probs, pref @ tilde, eta, beta
            )
        else:
            raise ValueError(f"unknown algorithm id {alg}")
