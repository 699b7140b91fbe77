"""Closed-form convergence bounds and canonical parameter schedules.

These are the analytic guarantees for the extragradient update: linear
decay of KL to the regularized equilibrium at rate (1 - eta*beta) plus a
noise floor proportional to sigma^2 log(3n), and the instantiation that
turns an exploitability target for the unregularized game into a concrete
(beta, eta, iteration-count) triple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError


def theorem_step_size(beta: float) -> float:
    """Largest step size covered by the linear-convergence guarantee."""
    return 1.0 / (beta + 3.0)


def optimizer_to_theory_eta(eta_optimizer: float, beta: float, n: int) -> float:
    """Convert an optimizer learning rate to the analysis step size.

    The squared-loss gradient with uniform pairs carries a 4/n factor, so
    an optimizer stepping by eta_opt realizes eta = 4 * eta_opt / (beta * n).
    """
    return 4.0 * eta_optimizer / (beta * n)


def theory_to_optimizer_eta(eta: float, beta: float, n: int) -> float:
    return eta * beta * n / 4.0


def kl_linear_bound(kl0: float, eta: float, beta: float, t: int) -> float:
    """Guaranteed KL(star || iterate) after t exact updates from kl0."""
    return kl0 * (1.0 - eta * beta) ** t


def kl_noise_floor(sigma: float, n: int, beta: float) -> float:
    """Additive plateau of KL(star || iterate) under per-coordinate noise
    with deviation sigma: 4 sigma^2 log(3n) / beta."""
    return 4.0 * sigma**2 * math.log(3.0 * n) / beta


def dualgap_linear_bound(kl0: float, eta: float, beta: float, t: int) -> float:
    """Guaranteed regularized dual gap after t exact updates from kl0."""
    return (2.0 / beta + 4.0 / eta) * kl0 * (1.0 - eta * beta) ** t


@dataclass(frozen=True)
class ExploitabilitySchedule:
    """Parameters that reach a target dual gap in the unregularized game."""

    epsilon: float
    beta: float
    eta: float
    iters: int


def exploitability_schedule(epsilon: float, n: int) -> ExploitabilitySchedule:
    """Schedule for driving the unregularized dual gap below epsilon.

    Starting from the uniform policy with a uniform reference, choose
    beta = epsilon / (4 log n) and eta = 1/(beta + 3); the regularized gap
    then needs to fall below epsilon/2, which the linear rate achieves
    after T = ceil(c * 4 log n / (eta * epsilon)) iterations with
    c = log((2/eps) * (8 log n / eps + 4/eta) * log n).
    """
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    if n < 2:
        raise InvalidInputError("n must be at least 2")
    log_n = math.log(n)
    beta = epsilon / (4.0 * log_n)
    eta = theorem_step_size(beta)
    c = math.log((2.0 / epsilon) * (8.0 * log_n / epsilon + 4.0 / eta) * log_n)
    iters = math.ceil(c * 4.0 * log_n / (eta * epsilon))
    return ExploitabilitySchedule(epsilon=epsilon, beta=beta, eta=eta, iters=iters)
