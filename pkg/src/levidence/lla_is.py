"""Level-adapted importance sampling estimator.

Each iteration draws a batch from a diagonal Gaussian importance density
(truncated to the prior support), picks a higher likelihood level from the
batch order statistics, estimates the super-level prior mass with
prior/importance weights (guarded by an effective-sample-size threshold),
and refits the importance density from the surviving samples.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import core
from .core import (NEG_INF, CountingLikelihood, LevelTrace, TerminationReason,
                   effective_sample_size, evidence_update, finalize_estimate,
                   log_sum_exp, shell_statistics)
from .schedule import (DegenerateLevelError, LevelPolicy, StoppingPolicy,
                       select_level, should_stop)

STDDEV_FLOOR_FRACTION = 1e-8


class InsufficientSamplesError(ValueError):
    pass


@dataclass
class GaussianISD:
    """Diagonal Gaussian importance density truncated to the prior support."""

    mean: np.ndarray
    stddev: np.ndarray
    support: list

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.stddev = np.asarray(self.stddev, dtype=float)
        if np.any(self.stddev <= 0):
            raise ValueError("ISD stddev entries must be positive")
        self._dists = [
            stats.truncnorm((lo - m) / s, (hi - m) / s, loc=m, scale=s)
            for m, s, (lo, hi) in zip(self.mean, self.stddev, self.support)
        ]

    def sample(self, rng, n):
        out = np.empty((n, len(self.mean)))
        for k, d in enumerate(self._dists):
            out[:, k] = d.ppf(core.open_uniform(rng, n))
        return out

    def log_pdf(self, theta):
        return float(sum(d.logpdf(x) for d, x in zip(self._dists, theta)))


@dataclass
class ISConfig:
    n_initial: int = 1000
    ess_threshold_fraction: float = 0.5
    stddev_multiplier: float = 2.0
    stddev_override: float | None = None
    level_policy: LevelPolicy = field(default_factory=LevelPolicy)
    stopping: StoppingPolicy = field(default_factory=StoppingPolicy)

    def __post_init__(self):
        if self.n_initial < 10:
            raise ValueError("n_initial must be at least 10")
        if self.stddev_multiplier <= 0:
            raise ValueError("stddev_multiplier must be positive")


def fit_isd(retained_samples, multiplier, prior_support, stddev_override=None):
    """Importance density from survivor mean and inflated sample stddev."""
    samples = np.atleast_2d(np.asarray(retained_samples, dtype=float))
    if samples.shape[0] < 2:
        raise InsufficientSamplesError("insufficient samples for ISD")
    mean = samples.mean(axis=0)
    if stddev_override is not None:
        stddev = np.full(samples.shape[1], float(stddev_override))
    else:
        stddev = multiplier * samples.std(axis=0, ddof=1)
        floors = np.array([
            STDDEV_FLOOR_FRACTION * _support_width(lo, hi)
            for lo, hi in prior_support
        ])
        stddev = np.where(stddev > 0, stddev, floors)
    return GaussianISD(mean=mean, stddev=stddev, support=list(prior_support))


def _support_width(lo, hi):
    if np.isfinite(lo) and np.isfinite(hi):
        return hi - lo
    return 1.0


def chi_is(log_likelihoods, log_weights, log_lambda):
    """Unnormalized importance-sampling estimate of the super-level mass."""
    log_L = np.asarray(log_likelihoods, dtype=float)
    log_w = np.asarray(log_weights, dtype=float)
    mask = log_L > log_lambda
    if not mask.any():
        return 0.0
    return math.exp(log_sum_exp(log_w[mask]) - math.log(len(log_L)))


def run_lla_is(problem, config, seed):
    """Run the full importance-sampling evidence loop."""
    logL_fn = CountingLikelihood(problem.log_likelihood)
    support = problem.support
    gamma_s = config.ess_threshold_fraction * config.n_initial

    trace = LevelTrace()
    log_E = NEG_INF
    chi_prev = 1.0
    isd = None  # prior is the ISD for iteration 1
    reason = None
    iteration = 0

    while True:
        iteration += 1
        rng = np.random.default_rng(np.random.SeedSequence([seed, iteration]))

        if isd is None:
            samples = problem.sample_prior(rng, config.n_initial)
            log_w = np.zeros(config.n_initial)
        else:
            samples = isd.sample(rng, config.n_initial)
            log_w = np.array([
                problem.log_prior(s) - isd.log_pdf(s) for s in samples
            ])
        log_L = np.array([logL_fn(s) for s in samples])

        try:
            log_lambda, _ = select_level(
                np.sort(log_L), config.level_policy, iteration,
                trace.log_lambda_current)
        except DegenerateLevelError:
            reason = TerminationReason.degenerate_level
            break

        # ESS guard: top up from the same density until the guard passes.
        # If the eval budget runs out first, stop without estimating chi
        # from the sub-threshold weights.
        guard_failed = False
        while effective_sample_size(np.exp(log_w - log_w.max())) <= gamma_s:
            if logL_fn.count >= config.stopping.max_evals:
                guard_failed = True
                break
            ess = effective_sample_size(np.exp(log_w - log_w.max()))
            extra = int(math.ceil(gamma_s - ess))
            if isd is None:
                new = problem.sample_prior(rng, extra)
                new_w = np.zeros(extra)
            else:
                new = isd.sample(rng, extra)
                new_w = np.array([
                    problem.log_prior(s) - isd.log_pdf(s) for s in new
                ])
            new_L = np.array([logL_fn(s) for s in new])
            samples = np.vstack([samples, new])
            log_w = np.concatenate([log_w, new_w])
            log_L = np.concatenate([log_L, new_L])
        if guard_failed:
            reason = TerminationReason.max_evals
            break

        chi = chi_is(log_L, log_w, log_lambda)
        chi = min(chi, chi_prev)
        log_E, log_inc = evidence_update(
            log_E, log_lambda, chi_prev, chi)

        in_shell = (log_L > trace.log_lambda_current) & (log_L <= log_lambda) \
            if trace.log_lambda else (log_L <= log_lambda)
        shell_mean, shell_second = shell_statistics(samples[in_shell])
        trace.add_level(log_lambda, chi, log_inc, shell_mean, shell_second,
                        logL_fn.count)
        chi_prev = chi

        stop, reason = should_stop(trace, config.stopping, log_inc)
        if stop:
            break

        retained = samples[log_L > log_lambda]
        try:
            isd = fit_isd(retained, config.stddev_multiplier, support,
                          stddev_override=config.stddev_override)
        except InsufficientSamplesError:
            if isd is None:
                reason = TerminationReason.degenerate_level
                break
            warnings.warn("too few survivors to refit ISD; reusing previous",
                          RuntimeWarning)

    return finalize_estimate(trace, reason, logL_fn.count, problem.dimension)
