"""Single-server workload bench tests."""

import math

import numpy as np
import pytest

from mwlab import arrivals as arr
from mwlab.errors import ConfigurationError
from mwlab.mg1 import DEFAULT_LADDER, WorkloadTrace, fit_scaling, simulate_workload


def test_default_ladder_shape():
    assert DEFAULT_LADDER[0] == 1000
    assert DEFAULT_LADDER[-1] == 10_000_000
    assert len(DEFAULT_LADDER) == 9  # half-decade steps


def test_one_step_mean_exact():
    # from empty, W(1) = (B*S - 1)^+ so E[W(1)] = p * E[(S-1)^+]
    p = 0.3
    service = arr.deterministic([3])
    trace = simulate_workload(p, service, horizon=1, replications=4000,
                              master_seed=5, ladder=[1])
    expected = p * (3 - 1)
    se = math.sqrt(p * (1 - p)) * 2 / math.sqrt(4000)
    assert abs(trace.mean_w[0] - expected) < 5 * se


def test_deterministic_service_saturates():
    service = arr.deterministic([1])
    trace = simulate_workload(0.5, service, horizon=100_000, replications=5,
                              master_seed=1, ladder=[1000, 3162, 10_000, 31_623, 100_000])
    assert trace.mean_w[-1] <= 2.0 * max(trace.mean_w[0], 1e-12)
    report = fit_scaling(trace, gamma=0.45)
    assert report.saturated
    assert report.passed is None


def test_few_ladder_points_rejected():
    service = arr.deterministic([1])
    trace = simulate_workload(0.5, service, horizon=3000, replications=2,
                              master_seed=1, ladder=[1000, 2000, 3000])
    with pytest.raises(ConfigurationError):
        fit_scaling(trace, gamma=0.45)


def test_unstable_load_rejected():
    with pytest.raises(ConfigurationError):
        simulate_workload(0.6, arr.deterministic([2]), 1000, 1, 0)


def test_lindley_monotone_in_initial_workload():
    # shared randomness: larger initial workload dominates pathwise
    service = arr.calibrate_rate(1.0, "bernoulli_zeta", s=2.5)
    ladder = [10, 100, 1000]
    for rep in range(0, 1000, 50):
        low = simulate_workload(0.2, service, 1000, 1, rep, ladder=ladder,
                                initial_workload=0)
        high = simulate_workload(0.2, service, 1000, 1, rep, ladder=ladder,
                                 initial_workload=50)
        assert (high.mean_w >= low.mean_w).all()


def test_mean_nondecreasing_from_empty():
    service = arr.calibrate_rate(1.5, "bernoulli_zeta", s=2.5)
    trace = simulate_workload(0.13, service, 100_000, 50, 9,
                              ladder=[100, 1000, 10_000, 100_000])
    steps = np.diff(trace.mean_w)
    se = np.sqrt(trace.stderr[1:] ** 2 + trace.stderr[:-1] ** 2)
    assert (steps >= -2 * se).all()


def _exact_workload_means(s, load, trunc, ladder):
    """Exact E[W(t)] by evolving the workload distribution.

    Service is the power-law pmf k^(-s) truncated at `trunc`, so the
    whole distribution fits in an array and each slot is one
    convolution; serves as an independent oracle for the growth
    exponent (no sampling noise at all).
    """
    pmf = np.arange(1, trunc + 1, dtype=np.float64) ** (-s)
    pmf /= pmf.sum()
    p = load / (np.arange(1, trunc + 1) @ pmf)
    wmax = 2 * trunc
    dist = np.zeros(wmax + 1)
    dist[0] = 1.0
    means = []
    horizon = max(ladder)
    targets = set(ladder)
    for t in range(1, horizon + 1):
        with_job = np.convolve(dist, pmf)[: wmax + 1]
        nxt = (1 - p) * dist
        nxt[: len(with_job)] += p * with_job
        dist = np.empty(wmax + 1)
        dist[0] = nxt[0] + nxt[1]
        dist[1:-1] = nxt[2:]
        dist[-1] = 0.0
        if t in targets:
            means.append(float(np.arange(wmax + 1) @ dist))
    return np.array(means)


@pytest.mark.slow
def test_exact_recursion_growth_exponent():
    # oracle: exact means (zero sampling noise) grow sublinearly with a
    # log-log slope inside the (0.05, 1/1.45 + 0.1] scaling window, as
    # long as the fit stays below the truncation-induced saturation
    ladder = [25, 50, 100, 200, 400]
    means = _exact_workload_means(2.5, 0.2, 2000, ladder)
    assert (np.diff(means) > 0).all()
    trace = WorkloadTrace(np.array(ladder), means, np.zeros(len(ladder)),
                          1, arr.HEAVY, 0.2)
    report = fit_scaling(trace, gamma=0.45)
    assert not report.saturated
    assert 0.05 < report.beta <= 1 / 1.45 + 0.1
    assert report.passed


@pytest.mark.slow
def test_exact_recursion_matches_simulation_short_horizon():
    # the simulated sample mean at short horizons (where sampling noise
    # is still manageable) agrees with the exact recursion
    ladder = [20, 60, 180]
    exact = _exact_workload_means(2.5, 0.2, 2000, ladder)
    service = arr.calibrate_rate(arr.analytic_moments(
        arr.bernoulli_zeta(1.0, 2.5)).mean, "bernoulli_zeta", s=2.5)
    trace = simulate_workload(0.2 / service.declared_mean, service,
                              180, 40_000, 21, ladder=ladder)
    # truncation at 2000 barely matters this early; allow 3 SE + 3% bias
    for sim, se, ex in zip(trace.mean_w, trace.stderr, exact):
        assert abs(sim - ex) < 3 * se + 0.03 * ex
