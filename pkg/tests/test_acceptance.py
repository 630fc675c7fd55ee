"""Acceptance suite: one top-level check per shipped guarantee.

Each test prints a single PASS/FAIL line so the suite doubles as a
release checklist.  The gates are fixed; loosening them is not an option.
"""

import csv
import math
import warnings

import numpy as np
import pytest

from levidence.baselines import NestedConfig, run_mc, run_nested
from levidence.cli import main, read_record
from levidence.core import (NEG_INF, BayesianProblem, normal_prior,
                            uniform_prior)
from levidence.lla_is import ISConfig, run_lla_is
from levidence.lla_mcmc import KernelConfig, MCMCConfig, run_lla_mcmc
from levidence.lla_ss import SSConfig, build_strata, run_lla_ss
from levidence.models import make_benchmark
from levidence.schedule import LevelPolicy, StoppingPolicy
from levidence.selection import ModelSet, posterior_model_probabilities

DATASET_SEEDS = range(7, 17)


def _report(criterion, ok, detail):
    print("ACCEPTANCE %s: %s (%s)" % (criterion, "PASS" if ok else "FAIL",
                                      detail))


def _error_percent(log_E, reference):
    return abs(log_E - reference) / abs(reference) * 100.0


def _cov_percent(values):
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1) / abs(values.mean()) * 100.0)


def _is_config():
    return ISConfig(
        n_initial=1000, ess_threshold_fraction=0.001, stddev_override=0.125,
        level_policy=LevelPolicy(f_init=0.025, f_slope=0.025, f_max=0.3,
                                 escalation_factor=1.5, escalation_cap=0.999),
        stopping=StoppingPolicy(max_iterations=250, max_evals=25000))


def _ss_config():
    return SSConfig(
        per_dim_counts=(5,), n_per_iteration=175,
        level_policy=LevelPolicy(f_init=0.025, f_slope=0.025, f_max=0.9,
                                 escalation_factor=1.02, escalation_cap=0.999),
        stopping=StoppingPolicy(max_iterations=250, max_evals=20000))


def _mcmc_config():
    return MCMCConfig(
        n_samples=1000, n_replace=25, kernel=KernelConfig(steps_per_sample=2),
        stopping=StoppingPolicy(max_iterations=250, max_evals=25000))


def test_criterion_1_reference_problem_accuracy():
    """Per-dataset error gates and across-dataset spread on the
    conjugate-Gaussian benchmark for all three adaptive estimators."""
    methods = {
        "lla_ss": (lambda p, s: run_lla_ss(p, _ss_config(), s), 0.15),
        "lla_mcmc": (lambda p, s: run_lla_mcmc(p, _mcmc_config(), s), 0.5),
        "lla_is": (lambda p, s: run_lla_is(p, _is_config(), s), 1.0),
    }
    ok = True
    details = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, (runner, gate) in methods.items():
            errors, ratios = [], []
            for seed in DATASET_SEEDS:
                problem, reference = make_benchmark("conjugate_gaussian",
                                                    seed)
                est = runner(problem, seed)
                errors.append(_error_percent(est.log_evidence, reference))
                ratios.append(est.log_evidence / reference)
            max_err = max(errors)
            cov = _cov_percent(ratios)
            details.append("%s max_err %.4f%% (gate %.2f%%) cov %.4f%%"
                           % (name, max_err, gate, cov))
            ok = ok and max_err <= gate and cov <= 0.3
    _report("1 reference-problem accuracy", ok, "; ".join(details))
    assert ok


def test_criterion_2_baselines_on_reference_problem():
    """Plain Monte Carlo within 3 standard errors; nested sampling within
    1% relative log evidence on the same datasets."""
    ok = True
    max_z, max_nested_err = 0.0, 0.0
    cfg = NestedConfig(n_live=500,
                       stopping=StoppingPolicy(max_iterations=20000,
                                               max_evals=10**6))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in DATASET_SEEDS:
            problem, reference = make_benchmark("conjugate_gaussian", seed)
            mc = run_mc(problem, 20000, seed)
            z = abs(mc.log_evidence - reference) / mc.standard_error_log
            max_z = max(max_z, z)
            nested = run_nested(problem, cfg, seed)
            err = _error_percent(nested.log_evidence, reference)
            max_nested_err = max(max_nested_err, err)
    ok = max_z <= 3.0 and max_nested_err <= 1.0
    _report("2 baselines", ok,
            "mc max |z| %.2f (gate 3); nested max err %.4f%% (gate 1%%)"
            % (max_z, max_nested_err))
    assert ok


def test_criterion_3_high_dimensional_scaling():
    """Constrained MCMC on the 100-dimensional product Gaussian: at most 1%
    relative error within 1e5 evaluations.  The nested baseline error is
    recorded for comparison but not gated."""
    problem, reference = make_benchmark("highdim_gaussian_100", 7)
    cfg = MCMCConfig(
        n_samples=500, n_replace=50, kernel=KernelConfig(steps_per_sample=3),
        stopping=StoppingPolicy(delta_evidence_tol=1e-4, chi_tol=1e-30,
                                max_iterations=2000, max_evals=100000))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = run_lla_mcmc(problem, cfg, 7)
        nested = run_nested(
            problem,
            NestedConfig(n_live=500,
                         stopping=StoppingPolicy(max_iterations=20000,
                                                 max_evals=100000)), 7)
    err = _error_percent(est.log_evidence, reference)
    nested_err = _error_percent(nested.log_evidence, reference)
    ok = err <= 1.0 and est.total_evals <= 100000
    _report("3 high-dimensional scaling", ok,
            "mcmc err %.4f%% in %d evals (gates 1%%, 1e5); "
            "nested err %.4f%% recorded, not gated"
            % (err, est.total_evals, nested_err))
    assert ok


def test_criterion_4_mass_estimator_error_law():
    """Empirical spread of the single-shell mass estimate follows
    sqrt((1 - dchi) / (N dchi)) with the expected 1/sqrt(N) slope."""
    dchi = 0.4  # shell theta in (0.3, 0.7] under L = 2 theta
    sizes = (250, 1000, 4000)
    reps = 200
    covs = []
    max_dev = 0.0
    for n in sizes:
        estimates = []
        for rep in range(reps):
            rng = np.random.default_rng(np.random.SeedSequence([77, n, rep]))
            theta = rng.uniform(size=n)
            estimates.append(np.mean((theta > 0.3) & (theta <= 0.7)))
        emp = np.std(estimates, ddof=1) / np.mean(estimates)
        expected = math.sqrt((1.0 - dchi) / (n * dchi))
        covs.append(emp)
        max_dev = max(max_dev, abs(emp / expected - 1.0))
    slope = np.polyfit(np.log(sizes), np.log(covs), 1)[0]
    ok = max_dev <= 0.2 and abs(slope + 0.5) <= 0.1
    _report("4 mass-estimator error law", ok,
            "max deviation %.3f (gate 0.2); log-log slope %.3f (gate -0.5"
            " +/- 0.1)" % (max_dev, slope))
    assert ok


def _recording_uniform_problem(seen):
    def log_L(t):
        v = math.log(2.0) + math.log(t[0]) if t[0] > 0 else NEG_INF
        seen.append(v)
        return v
    return BayesianProblem(dimension=1, priors=[uniform_prior(0.0, 1.0)],
                           log_likelihood=log_L)


def _recording_gaussian_problem(seen):
    def log_L(t):
        v = -0.5 * math.log(2 * math.pi) - 0.5 * t[0] ** 2
        seen.append(v)
        return v
    return BayesianProblem(dimension=1, priors=[normal_prior(0.0, 1.0)],
                           log_likelihood=log_L)


def test_criterion_5_invariant_suite():
    """Structural invariants hold across randomized configurations of every
    estimator, plus normalization and shift invariance of the selection
    layer."""
    rng = np.random.default_rng(2024)
    ok = True
    failures = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(100):
            seen = []
            problem = (_recording_uniform_problem(seen) if i % 2 == 0
                       else _recording_gaussian_problem(seen))
            stopping = StoppingPolicy(
                max_iterations=int(rng.integers(10, 60)),
                max_evals=int(rng.integers(2000, 8000)))
            kind = ("lla_is", "lla_ss", "lla_mcmc", "nested")[i % 4]
            seed = int(rng.integers(0, 2**32))
            if kind == "lla_is":
                est = run_lla_is(problem, ISConfig(
                    n_initial=int(rng.integers(200, 800)),
                    ess_threshold_fraction=float(rng.choice([0.5, 0.01])),
                    stddev_multiplier=float(rng.uniform(1.5, 3.0)),
                    stopping=stopping), seed)
            elif kind == "lla_ss":
                counts = (int(rng.integers(2, 9)),)
                grid = build_strata(problem, counts)
                if not math.isclose(len(grid.strata) * grid.mass, 1.0,
                                    abs_tol=1e-12):
                    failures.append("run %d: strata masses do not sum to 1"
                                    % i)
                est = run_lla_ss(problem, SSConfig(
                    per_dim_counts=counts,
                    n_per_iteration=int(rng.integers(50, 300)),
                    stopping=stopping), seed)
                ac = est.trace.active_counts
                if any(b > a for a, b in zip(ac, ac[1:])):
                    failures.append("run %d: active strata grew" % i)
            elif kind == "lla_mcmc":
                n_samples = int(rng.integers(100, 500))
                est = run_lla_mcmc(problem, MCMCConfig(
                    n_samples=n_samples,
                    n_replace=int(rng.integers(5, max(6, n_samples // 4))),
                    stopping=stopping), seed)
            else:
                est = run_nested(problem, NestedConfig(
                    n_live=int(rng.integers(50, 200)),
                    stopping=stopping), seed)

            lam, chi = est.trace.log_lambda, est.trace.chi
            if any(b <= a for a, b in zip(lam, lam[1:])):
                failures.append("run %d (%s): levels not strictly increasing"
                                % (i, kind))
            if any(b > a for a, b in zip(chi, chi[1:])):
                failures.append("run %d (%s): mass not nonincreasing"
                                % (i, kind))
            if est.log_evidence > max(seen) + 1e-9:
                failures.append("run %d (%s): evidence above max likelihood"
                                % (i, kind))

        for i in range(100):
            k = int(rng.integers(2, 6))
            evid = list(rng.uniform(-300.0, 50.0, size=k))
            probs = posterior_model_probabilities(
                ModelSet(names=[str(j) for j in range(k)],
                         log_evidences=evid))
            shift = float(rng.uniform(-200.0, 200.0))
            shifted = posterior_model_probabilities(
                ModelSet(names=[str(j) for j in range(k)],
                         log_evidences=[e + shift for e in evid]))
            if abs(sum(probs) - 1.0) > 1e-12:
                failures.append("selection %d: probabilities do not sum to 1"
                                % i)
            if not np.allclose(probs, shifted, atol=1e-10):
                failures.append("selection %d: not shift invariant" % i)

    ok = not failures
    _report("5 invariant suite", ok,
            "200 randomized checks" if ok else "; ".join(failures[:5]))
    assert ok, failures


def test_criterion_6_oracle_equivalence():
    """Constant likelihoods integrate exactly for every estimator; the
    linear-likelihood evidence lands within Monte Carlo error of its exact
    value; the grid oracle agrees with the closed form."""
    log_c = math.log(0.25)
    flat = BayesianProblem(dimension=1, priors=[uniform_prior(0.0, 1.0)],
                           log_likelihood=lambda t: log_c)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = {
            "mc": run_mc(flat, 200, 0).log_evidence,
            "nested": run_nested(flat, NestedConfig(n_live=50), 0)
            .log_evidence,
            "lla_is": run_lla_is(flat, ISConfig(n_initial=200), 0)
            .log_evidence,
            "lla_ss": run_lla_ss(
                flat, SSConfig(per_dim_counts=(5,), n_per_iteration=100),
                0).log_evidence,
            "lla_mcmc": run_lla_mcmc(
                flat, MCMCConfig(n_samples=100, n_replace=10), 0)
            .log_evidence,
        }
        const_ok = all(abs(v - log_c) < 1e-9 for v in results.values())

        linear, _ = make_benchmark("uniform_linear", 0)
        mc = run_mc(linear, 20000, 1)
        linear_ok = abs(mc.log_evidence) <= 3.0 * mc.standard_error_log

        from levidence.models import (ConjugateGaussianProblem,
                                      conjugate_exact_log_evidence,
                                      grid_log_evidence)
        p = ConjugateGaussianProblem(data=np.array([0.4, -0.1, 0.7]),
                                     mu0=0.0, sigma0=1.0, sigma=0.8)
        gap = abs(grid_log_evidence(p.to_bayesian_problem())
                  - conjugate_exact_log_evidence(p))
        oracle_ok = gap < 1e-6

    ok = const_ok and linear_ok and oracle_ok
    _report("6 oracle equivalence", ok,
            "constant exact: %s; linear |z| within 3 SE: %s; grid-vs-closed"
            " gap %.2e" % (const_ok, linear_ok, gap))
    assert ok


def test_criterion_7_model_selection():
    """The generating quadratic model wins the regression comparison with
    posterior probability above 0.95 from MCMC-estimated evidences."""
    triples = make_benchmark("polynomial_regression_set", 7)
    cfg = lambda: MCMCConfig(
        n_samples=1000, n_replace=100,
        stopping=StoppingPolicy(delta_evidence_tol=1e-4, chi_tol=1e-20,
                                max_iterations=2000, max_evals=200000))
    names, log_Es = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, problem, _ in triples:
            est = run_lla_mcmc(problem, cfg(), 7)
            names.append(name)
            log_Es.append(est.log_evidence)
    probs = posterior_model_probabilities(
        ModelSet(names=names, log_evidences=log_Es))
    p_d2 = probs[names.index("polynomial_regression_d2")]
    ok = p_d2 > 0.95
    _report("7 model selection", ok,
            "P(degree 2) = %.4f (gate > 0.95)" % p_d2)
    assert ok


CLI_MC = """\
[experiment]
benchmark = uniform_linear
estimator = mc
seed = 7
replications = 8

[mc]
n = 2000
"""

CLI_MCMC = """\
[experiment]
benchmark = conjugate_gaussian
estimator = lla_mcmc
seed = 7
replications = 8

[lla_mcmc]
n_samples = 200
n_replace = 20

[stopping]
max_iterations = 60
max_evals = 6000
"""


def test_criterion_8_determinism(tmp_path, capsys):
    """Byte-identical CLI outputs for the same config and seed at 1 and at
    8 workers."""
    ok = True
    details = []
    for tag, text in (("mc", CLI_MC), ("lla_mcmc", CLI_MCMC)):
        cfg = tmp_path / ("%s.ini" % tag)
        cfg.write_text(text)
        outs = []
        for workers in (1, 8):
            out = tmp_path / ("%s_w%d" % (tag, workers))
            code = main(["run", "--config", str(cfg), "--out-dir", str(out),
                         "--workers", str(workers)])
            ok = ok and code == 0
            outs.append(out)
        names = ["summary.csv", "record.txt"] + [
            "trace_rep%03d.csv" % r for r in range(8)]
        same = all((outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
                   for n in names)
        details.append("%s identical: %s" % (tag, same))
        ok = ok and same
    _report("8 determinism", ok, "; ".join(details))
    assert ok
