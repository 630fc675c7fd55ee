"""Adaptive level selection and run termination shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import NEG_INF, TerminationReason


class DegenerateLevelError(RuntimeError):
    """No strictly higher level can be selected from the current samples."""


@dataclass
class LevelPolicy:
    """Rejection-fraction schedule f(i) = min(f_max, f_init + f_slope*(i-1)).

    When the candidate level does not strictly exceed the previous one, the
    fraction is escalated multiplicatively (capped) and retried a bounded
    number of times before signalling degeneracy.
    """

    f_init: float = 0.025
    f_slope: float = 0.025
    f_max: float = 0.3
    escalation_factor: float = 1.5
    escalation_cap: float = 0.9
    max_escalations: int = 10

    def fraction(self, iteration):
        f = min(self.f_max, self.f_init + self.f_slope * (iteration - 1))
        if not 0.0 < f < 1.0:
            raise ValueError("rejection fraction outside (0, 1)")
        return f


@dataclass
class StoppingPolicy:
    delta_evidence_tol: float = 1e-4
    chi_tol: float = 0.005
    max_iterations: int = 100
    max_evals: int = 20000

    def __post_init__(self):
        if min(self.delta_evidence_tol, self.chi_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations <= 0 or self.max_evals <= 0:
            raise ValueError("iteration/eval caps must be positive")


def select_level(sorted_log_likelihoods, policy, iteration, log_lambda_prev):
    """Pick the next level as the ceil(f*N)-th lowest pooled log-likelihood.

    Escalates f when the order statistic fails to strictly exceed the
    previous level; raises DegenerateLevelError when escalation is exhausted.
    Returns (log_lambda_new, n_reject).
    """
    xs = sorted_log_likelihoods
    n = len(xs)
    if n == 0:
        raise ValueError("no likelihood values to select a level from")
    f = policy.fraction(iteration)
    for _ in range(policy.max_escalations + 1):
        n_reject = min(max(int(math.ceil(f * n)), 1), n)
        candidate = xs[n_reject - 1]
        if candidate > log_lambda_prev:
            return float(candidate), n_reject
        if f >= policy.escalation_cap:
            break
        f = min(f * policy.escalation_factor, policy.escalation_cap)
    raise DegenerateLevelError(
        "no likelihood value strictly exceeds the previous level")


def should_stop(trace, policy, last_log_increment):
    """Evaluate the stopping criteria in fixed priority order.

    Order: relative evidence change, chi floor, iteration cap, eval cap.
    Returns (stop, reason-or-None).
    """
    if len(trace) == 0:
        raise ValueError("stopping policy needs at least one iteration")
    log_E = trace.log_evidence
    if log_E > NEG_INF and last_log_increment > NEG_INF:
        # a zero increment (clamped nonmonotone chi) carries no convergence
        # information, so only real increments can satisfy this criterion
        rel_change = math.exp(min(last_log_increment - log_E, 0.0))
        if rel_change < policy.delta_evidence_tol:
            return True, TerminationReason.delta_evidence
    if trace.chi_current < policy.chi_tol:
        return True, TerminationReason.chi_floor
    if len(trace) >= policy.max_iterations:
        return True, TerminationReason.max_iterations
    if trace.n_evals[-1] >= policy.max_evals:
        return True, TerminationReason.max_evals
    return False, None
