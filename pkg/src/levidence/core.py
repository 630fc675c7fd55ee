"""Log-domain primitives, prior/problem types, and evidence accumulation.

Everything here is shared by the level-adapted estimators and the baselines:
numerically safe log-sum-exp, the strict exceedance indicator, effective
sample size, the rectangle-rule evidence update, and posterior-moment
recovery from a level trace.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special, stats

NEG_INF = float("-inf")


class DegenerateWeightsError(ValueError):
    pass


class EmptyTraceError(ValueError):
    pass


def log_sum_exp(xs):
    """log(sum(exp(xs))) without overflow; -inf for an all-(-inf) input."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise ValueError("log_sum_exp of empty sequence")
    if np.isnan(xs).any():
        raise ValueError("non-numeric term")
    m = np.max(xs)
    if m == NEG_INF:
        return NEG_INF
    return float(m + np.log(np.sum(np.exp(xs - m))))


def open_uniform(rng, size=None):
    """Uniform variates restricted to the open interval (0, 1).

    Keeps inverse-CDF sampling away from infinite quantiles.
    """
    u = rng.uniform(size=size)
    return np.clip(u, 1e-16, 1.0 - 1e-16)


def exceeds_level(log_L, log_lambda):
    """Strict exceedance: ties count as non-exceeding."""
    return log_L > log_lambda


def effective_sample_size(weights):
    """(sum w)^2 / sum w^2 for nonnegative weights; in [1, N]."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise ValueError("empty weights")
    if not np.all(np.isfinite(w)):
        raise ValueError("non-finite weights")
    s = w.sum()
    if s <= 0.0:
        raise DegenerateWeightsError("degenerate weights")
    return float(s * s / np.sum(w * w))


def evidence_update(log_E_prev, log_lambda, chi_prev, chi_cur):
    """One rectangle-rule quadrature step in log space.

    Returns (log_E_new, log_increment) with increment lambda*(chi_prev-chi_cur).
    A noisy chi_cur exceeding chi_prev is clamped to chi_prev with a warning.
    """
    if chi_prev > 1.0 + 1e-12:
        raise ValueError("chi_prev above 1")
    if chi_cur > chi_prev:
        warnings.warn(
            "nonmonotone chi estimate clamped (chi_cur %.3g > chi_prev %.3g)"
            % (chi_cur, chi_prev),
            RuntimeWarning,
        )
        chi_cur = chi_prev
    d_chi = chi_prev - chi_cur
    if d_chi <= 0.0 or log_lambda == NEG_INF:
        return log_E_prev, NEG_INF
    log_increment = log_lambda + math.log(d_chi)
    if log_E_prev == NEG_INF:
        return log_increment, log_increment
    return log_sum_exp([log_E_prev, log_increment]), log_increment


@dataclass
class MarginalPrior:
    """One independent 1-D prior marginal.

    log_pdf, sample and inverse_cdf must agree; support is a (lo, hi) pair
    (entries may be infinite).  mean/std are used for proposal scaling and
    quadrature bounds.
    """

    log_pdf: Callable[[float], float]
    sample: Callable[[np.random.Generator], float]
    inverse_cdf: Callable[[float], float]
    support: tuple
    mean: float = 0.0
    std: float = 1.0

    def normalization_defect(self):
        """|integral of exp(log_pdf) - 1| by adaptive quadrature."""
        lo, hi = self.support
        if not np.isfinite(lo):
            lo = self.mean - 12.0 * self.std
        if not np.isfinite(hi):
            hi = self.mean + 12.0 * self.std
        total, _ = integrate.quad(lambda x: math.exp(self.log_pdf(x)), lo, hi,
                                  limit=200)
        return abs(total - 1.0)


def normal_prior(mean, std):
    # closed-form density and scipy's ndtri quantile; frozen-distribution
    # methods carry too much per-call overhead for the samplers' hot loops
    mean, std = float(mean), float(std)
    log_norm = -0.5 * math.log(2.0 * math.pi) - math.log(std)
    inv2v = 0.5 / (std * std)

    def log_pdf(x):
        d = x - mean
        return log_norm - inv2v * d * d

    def inverse_cdf(u):
        return mean + std * special.ndtri(u)

    return MarginalPrior(
        log_pdf=log_pdf,
        sample=lambda rng: mean + std * float(special.ndtri(open_uniform(rng))),
        inverse_cdf=inverse_cdf,
        support=(-math.inf, math.inf),
        mean=mean,
        std=std,
    )


def uniform_prior(lo, hi):
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        raise ValueError("need hi > lo")
    log_density = -math.log(hi - lo)

    def log_pdf(x):
        return log_density if lo <= x <= hi else NEG_INF

    return MarginalPrior(
        log_pdf=log_pdf,
        sample=lambda rng: lo + (hi - lo) * rng.uniform(),
        inverse_cdf=lambda u: lo + (hi - lo) * u,
        support=(lo, hi),
        mean=0.5 * (lo + hi),
        std=(hi - lo) / math.sqrt(12.0),
    )


def truncated_normal_prior(mean, std, lo, hi):
    a, b = (lo - mean) / std, (hi - mean) / std
    d = stats.truncnorm(a, b, loc=mean, scale=std)
    return MarginalPrior(
        log_pdf=d.logpdf,
        sample=lambda rng: float(d.ppf(open_uniform(rng))),
        inverse_cdf=d.ppf,
        support=(float(lo), float(hi)),
        mean=float(d.mean()),
        std=float(d.std()),
    )


@dataclass
class BayesianProblem:
    """Product-of-marginals prior plus a deterministic log-likelihood."""

    dimension: int
    priors: list
    log_likelihood: Callable[[np.ndarray], float]

    def __post_init__(self):
        if len(self.priors) != self.dimension:
            raise ValueError("prior count does not match dimension")

    def log_prior(self, theta):
        theta = np.asarray(theta, dtype=float)
        return float(sum(p.log_pdf(x) for p, x in zip(self.priors, theta)))

    def sample_prior(self, rng, n=1):
        out = np.empty((n, self.dimension))
        for k, p in enumerate(self.priors):
            u = open_uniform(rng, n)
            out[:, k] = [p.inverse_cdf(ui) for ui in u]
        return out

    @property
    def support(self):
        return [p.support for p in self.priors]


class CountingLikelihood:
    """Wraps a log-likelihood with an evaluation counter."""

    def __init__(self, fn):
        self.fn = fn
        self.count = 0

    def __call__(self, theta):
        self.count += 1
        return float(self.fn(theta))


class TerminationReason(str, Enum):
    delta_evidence = "delta_evidence"
    chi_floor = "chi_floor"
    max_iterations = "max_iterations"
    max_evals = "max_evals"
    degenerate_level = "degenerate_level"


@dataclass
class LevelTrace:
    """The (lambda_i, chi_i) staircase with per-shell summaries.

    chi starts implicitly at 1.0; entries are appended once per accepted
    level.  Shell means/second moments may be None for empty shells.
    """

    log_lambda: list = field(default_factory=list)
    chi: list = field(default_factory=list)
    log_evidence_increments: list = field(default_factory=list)
    shell_means: list = field(default_factory=list)
    shell_second_moments: list = field(default_factory=list)
    n_evals: list = field(default_factory=list)

    def __len__(self):
        return len(self.log_lambda)

    @property
    def chi_current(self):
        return self.chi[-1] if self.chi else 1.0

    @property
    def log_lambda_current(self):
        return self.log_lambda[-1] if self.log_lambda else NEG_INF

    @property
    def log_evidence(self):
        if not self.log_evidence_increments:
            return NEG_INF
        return log_sum_exp(self.log_evidence_increments)

    def add_level(self, log_lambda, chi, log_increment, shell_mean,
                  shell_second_moment, cumulative_evals):
        if self.chi and chi > self.chi[-1] + 1e-15:
            raise ValueError("chi must be nonincreasing")
        self.log_lambda.append(float(log_lambda))
        self.chi.append(float(chi))
        self.log_evidence_increments.append(float(log_increment))
        self.shell_means.append(shell_mean)
        self.shell_second_moments.append(shell_second_moment)
        self.n_evals.append(int(cumulative_evals))


@dataclass
class EvidenceEstimate:
    log_evidence: float
    trace: LevelTrace
    posterior_mean: np.ndarray
    posterior_variance: np.ndarray
    termination_reason: TerminationReason
    total_evals: int


def posterior_moments(trace, log_evidence):
    """Shell-weighted posterior mean and variance.

    Weights are exp(log_increment - log_evidence); shells without samples
    carry no weight.  Variance is clamped at zero elementwise.
    """
    pairs = [
        (li, m, s2)
        for li, m, s2 in zip(trace.log_evidence_increments, trace.shell_means,
                             trace.shell_second_moments)
        if m is not None and li > NEG_INF
    ]
    if not pairs:
        raise EmptyTraceError("no shells accumulated")
    if log_evidence == NEG_INF:
        raise EmptyTraceError("no shells accumulated")
    w = np.array([math.exp(li - log_evidence) for li, _, _ in pairs])
    w = w / w.sum()
    means = np.array([m for _, m, _ in pairs], dtype=float)
    seconds = np.array([s2 for _, _, s2 in pairs], dtype=float)
    mean = w @ means
    var = np.maximum(w @ seconds - mean**2, 0.0)
    return mean, var


def finalize_estimate(trace, reason, total_evals, dimension):
    """Build an EvidenceEstimate, falling back to NaN moments on empty shells."""
    log_E = trace.log_evidence
    try:
        mean, var = posterior_moments(trace, log_E)
    except EmptyTraceError:
        mean = np.full(dimension, np.nan)
        var = np.full(dimension, np.nan)
    return EvidenceEstimate(
        log_evidence=log_E,
        trace=trace,
        posterior_mean=np.asarray(mean, dtype=float),
        posterior_variance=np.asarray(var, dtype=float),
        termination_reason=reason,
        total_evals=int(total_evals),
    )


def shell_statistics(samples, weights=None):
    """Mean and elementwise second moment of the samples in one shell.

    Returns (None, None) for an empty shell; optional per-sample weights.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        return None, None
    if samples.ndim == 1:
        samples = samples[:, None]
    if weights is None:
        mean = samples.mean(axis=0)
        second = (samples**2).mean(axis=0)
    else:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
        mean = w @ samples
        second = w @ samples**2
    return mean, second
