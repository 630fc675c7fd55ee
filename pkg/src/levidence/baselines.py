"""Reference estimators: plain Monte Carlo and classic nested sampling."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (NEG_INF, CountingLikelihood, LevelTrace, TerminationReason,
                   evidence_update, finalize_estimate, log_sum_exp,
                   shell_statistics)
from .lla_mcmc import KernelConfig, constrained_mh_step
from .schedule import StoppingPolicy, should_stop

NESTED_WALK_STEPS = 20


@dataclass
class NestedConfig:
    n_live: int = 500
    stopping: StoppingPolicy = field(default_factory=StoppingPolicy)
    kernel: KernelConfig = field(
        default_factory=lambda: KernelConfig(steps_per_sample=NESTED_WALK_STEPS))

    def __post_init__(self):
        if self.n_live < 2:
            raise ValueError("n_live must be >= 2")


def run_mc(problem, n, seed):
    """Direct prior expectation of the likelihood, with a delta-method SE."""
    if n < 1:
        raise ValueError("n must be >= 1")
    logL_fn = CountingLikelihood(problem.log_likelihood)
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    samples = problem.sample_prior(rng, n)
    log_L = np.array([logL_fn(s) for s in samples])

    m = log_L.max()
    if m == NEG_INF:
        warnings.warn("all likelihoods are zero", RuntimeWarning)
        log_E = NEG_INF
        se_log = math.inf
    else:
        w = np.exp(log_L - m)                  # scaled linear likelihoods
        log_E = m + math.log(w.mean())
        # SE of log(mean) via the delta method on the scaled values
        se_log = w.std(ddof=1) / (w.mean() * math.sqrt(n)) if n > 1 else math.inf

    trace = LevelTrace()
    if m == NEG_INF:
        shell_mean, shell_second = None, None
    else:
        shell_mean, shell_second = shell_statistics(samples, np.exp(log_L - m))
    trace.add_level(log_E, 0.0, log_E, shell_mean, shell_second, logL_fn.count)
    est = finalize_estimate(trace, TerminationReason.max_evals, logL_fn.count,
                            problem.dimension)
    est.log_evidence = log_E
    est.standard_error_log = se_log
    return est


def _replace_point(problem, logL_fn, live, live_log_L, log_lambda, kernel,
                   stddev, component_wise, seed_seq):
    """Constrained MH walk from a random survivor strictly above the level."""
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_seq)))
    above = np.flatnonzero(live_log_L > log_lambda)
    if above.size == 0:
        return None
    start = above[rng.integers(above.size)]
    state = np.array(live[start], dtype=float)
    log_L = live_log_L[start]
    for _ in range(kernel.steps_per_sample):
        state, log_L, _ = constrained_mh_step(
            state, log_L, log_lambda, stddev, component_wise, problem,
            logL_fn, rng)
    return state, log_L


def run_nested(problem, config, seed):
    """Classic nested sampling with the deterministic exp(-i/N) volume model.

    Live points are replaced via the constrained MH kernel; the final
    live-set contribution is added on termination.
    """
    logL_fn = CountingLikelihood(problem.log_likelihood)
    n_live = config.n_live
    stddev, component_wise = config.kernel.resolve(problem)

    rng0 = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    live = problem.sample_prior(rng0, n_live)
    live_log_L = np.array([logL_fn(s) for s in live])

    trace = LevelTrace()
    log_E = NEG_INF
    x_prev = 1.0
    reason = None
    i = 0

    while True:
        i += 1
        worst = int(np.argmin(live_log_L))
        log_lambda = float(live_log_L[worst])
        if log_lambda <= trace.log_lambda_current:
            reason = TerminationReason.degenerate_level
            i -= 1
            x_cur = x_prev
            break
        replacement = _replace_point(problem, logL_fn, live, live_log_L,
                                     log_lambda, config.kernel, stddev,
                                     component_wise, (seed, i))
        if replacement is None:
            # constant plateau: no point strictly above, stop before shrinking
            reason = TerminationReason.degenerate_level
            i -= 1
            x_cur = x_prev
            break

        x_cur = math.exp(-i / n_live)
        log_E, log_inc = evidence_update(log_E, log_lambda, x_prev, x_cur)
        shell_mean, shell_second = shell_statistics(live[worst][None, :])
        trace.add_level(log_lambda, x_cur, log_inc, shell_mean, shell_second,
                        logL_fn.count)
        live[worst], live_log_L[worst] = replacement
        x_prev = x_cur

        stop, reason = should_stop(trace, config.stopping, log_inc)
        # the delta-evidence criterion uses the bound on what the live set
        # can still contribute, not the raw last increment
        if stop and reason == TerminationReason.delta_evidence:
            remaining = live_log_L.max() + math.log(x_cur)
            if remaining - log_E >= math.log(config.stopping.delta_evidence_tol):
                stop, reason = False, None
        if stop:
            break

    # final live-set contribution: each point carries mass X_final / n_live
    log_live = log_sum_exp(live_log_L) - math.log(n_live) + math.log(x_cur) \
        if x_cur > 0 else NEG_INF
    log_E = log_sum_exp([log_E, log_live]) if log_E > NEG_INF else log_live
    shell_mean, shell_second = shell_statistics(live)
    lam_final = float(live_log_L.max())
    if lam_final > trace.log_lambda_current:
        trace.add_level(lam_final, 0.0, log_live, shell_mean, shell_second,
                        logL_fn.count)

    est = finalize_estimate(trace, reason, logL_fn.count, problem.dimension)
    est.log_evidence = log_E
    return est
