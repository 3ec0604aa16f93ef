"""Diagnostics tests: renewal-reward curves, classifiers, drift probe."""


import numpy as np
import pytest

from mwlab import arrivals as arr
from mwlab import estimators as est
from mwlab import rng as rngmod
from mwlab.core import default_schedule_set
from mwlab.kernels import run_fast


def toy_trace(pattern, n_rep, queue=1):
    """(T+1, 3) trace with the given values in one queue, zeros elsewhere."""
    col = np.tile(pattern, n_rep)
    out = np.zeros((len(col), 3), dtype=np.int64)
    out[:, queue] = col
    return out


class TestLyapunov:
    def test_zero_state(self):
        assert est.lyapunov_value((0, 0, 0)) == 0

    def test_positive_bracket(self):
        assert est.lyapunov_value((1, 2, 10)) == 13

    def test_clipped_bracket(self):
        assert est.lyapunov_value((5, 2, 3)) == 6

    def test_wrong_dimension(self):
        with pytest.raises(ValueError):
            est.lyapunov_value((1, 2))

    def test_nonnegative_and_zero_iff(self):
        rng = np.random.default_rng(0)
        states = rng.integers(0, 6, size=(2000, 3))
        v = est.lyapunov_value(states)
        assert (v >= 0).all()
        zero = v == 0
        expected = (states[:, 1] == 0) & (states[:, 2] <= states[:, 0])
        assert (zero == expected).all()


class TestTruncatedMean:
    def test_toy_trace_unclipped(self):
        trace = toy_trace([0, 1, 2], 100)
        curve = est.truncated_mean(trace, 1, [10])
        assert curve.estimates[0] == pytest.approx(1.0)
        assert not curve.inconclusive

    def test_toy_trace_clipped(self):
        trace = toy_trace([0, 1, 2], 100)
        curve = est.truncated_mean(trace, 1, [1])
        assert curve.estimates[0] == pytest.approx(2 / 3)

    def test_no_renewals_inconclusive(self):
        trace = np.ones((50, 3), dtype=np.int64)
        curve = est.truncated_mean(trace, 1, [4, 8])
        assert curve.inconclusive
        assert np.isnan(curve.estimates).all()

    def test_few_cycles_flagged(self):
        trace = toy_trace([0, 1, 2], 5)
        assert est.truncated_mean(trace, 1, [10]).inconclusive

    def test_monotone_in_level(self):
        specs = (arr.calibrate_rate(0.2, "bernoulli_zeta", s=2.5),
                 arr.bernoulli(0.4), arr.bernoulli(0.3))
        trace = run_fast(specs, default_schedule_set(), 100_000, 17).lengths
        for q in range(3):
            curve = est.truncated_mean(trace, q, [1, 4, 16, 64, 256])
            assert (np.diff(curve.estimates) >= 0).all()

    def test_ratio_vs_time_average(self):
        specs = (arr.bernoulli(0.2), arr.bernoulli(0.4), arr.bernoulli(0.3))
        trace = run_fast(specs, default_schedule_set(), 100_000, 3).lengths
        curve = est.truncated_mean(trace, 1, [4, 16, 64])
        assert curve.n_cycles >= 100
        for i in range(3):
            # ratio and plain time-average estimators agree within 3 se
            tol = max(3 * curve.stderrs[i], 1e-9) + 3 / len(trace)
            assert abs(curve.estimates[i] - curve.time_averages[i]) < tol

    def test_batching_preserves_estimates(self):
        specs = (arr.bernoulli(0.2), arr.bernoulli(0.4), arr.bernoulli(0.3))
        trace = run_fast(specs, default_schedule_set(), 200_000, 4).lengths
        levels = [4, 16, 64]
        lens, rew = est.cycle_aggregates(trace, 1, levels)
        blens, brew, n = est.batch_cycles(lens, rew, max_batches=500)
        assert n == len(lens)
        full = est.truncated_mean_from_aggregates(lens, rew, levels)
        batched = est.truncated_mean_from_aggregates(blens, brew, levels, n_cycles=n)
        np.testing.assert_allclose(full.estimates, batched.estimates)
        assert batched.n_cycles == full.n_cycles

    def test_series_aggregate_matches_direct(self):
        rng = np.random.default_rng(5)
        x = rng.integers(0, 50, 10_000)
        levels = [4, 16, 64]
        agg = est.series_aggregate(x, levels)
        curve = est.truncated_mean_from_series([agg], levels)
        direct = est.truncated_mean_samples(x, levels)
        np.testing.assert_allclose(curve.estimates, direct.estimates)
        assert curve.n_cycles == len(x)


class TestClassifyDivergence:
    def manual_curve(self, levels, estimates, stderrs=None):
        levels = np.asarray(levels)
        estimates = np.asarray(estimates, dtype=np.float64)
        if stderrs is None:
            stderrs = np.zeros(len(levels))
        return est.TruncatedMeanCurve(levels, estimates, np.asarray(stderrs), 1000)

    def test_saturating_curve(self):
        c = self.manual_curve([8, 16, 32, 64], [1.00, 1.01, 1.01, 1.01])
        assert est.classify_divergence(c) == est.FINITE

    def test_doubling_curve(self):
        c = self.manual_curve([8, 16, 32, 64], [1, 2, 4, 8])
        assert est.classify_divergence(c) == est.DIVERGING

    def test_noisy_flat_curve(self):
        c = self.manual_curve([8, 16, 32, 64], [1.0, 1.3, 1.1, 1.4],
                              stderrs=[0.5, 0.5, 0.5, 0.5])
        assert est.classify_divergence(c) == est.INCONCLUSIVE

    def test_requires_four_points(self):
        with pytest.raises(ValueError):
            est.classify_divergence(self.manual_curve([8, 16, 32], [1, 1, 1]))

    def test_inconclusive_curve_passthrough(self):
        c = self.manual_curve([8, 16, 32, 64], [1, 2, 4, 8])
        c.inconclusive = True
        assert est.classify_divergence(c) == est.INCONCLUSIVE

    def test_zero_curve_is_finite(self):
        c = self.manual_curve([8, 16, 32, 64], [0.0, 0.0, 0.0, 0.0])
        assert est.classify_divergence(c) == est.FINITE

    def test_bootstrap_slope_ci_gates_divergence(self):
        c = self.manual_curve([8, 16, 32, 64], [1, 2, 4, 8])
        c.slope_ci_lo, c.slope_ci_hi = -0.1, 2.0  # CI touching zero
        assert est.classify_divergence(c) == est.INCONCLUSIVE
        c.slope_ci_lo = 0.3
        assert est.classify_divergence(c) == est.DIVERGING


class TestDriftProbe:
    def test_constant_zero_trace_inconclusive(self):
        trace = np.zeros((500, 3), dtype=np.int64)
        report = est.drift_probe(trace, 10)
        assert report.inconclusive
        assert report.n_samples == 0

    def test_constant_high_trace_zero_drift(self):
        trace = np.zeros((101, 3), dtype=np.int64)
        trace[:, 1] = 10  # V = 30 > alpha = 6
        report = est.drift_probe(trace, 1)
        assert report.n_samples == 100
        assert report.estimate == pytest.approx(0.0)
        assert report.case1_n == 100  # Q2 > T everywhere
        assert report.case2_n == 0
        assert not report.inconclusive

    def test_linear_decrease_measured_exactly(self):
        n = 60
        trace = np.zeros((n + 1, 3), dtype=np.int64)
        trace[:, 1] = np.arange(n + 1)[::-1] + 10  # Q2 falls by 1 per slot
        window = 4
        report = est.drift_probe(trace, window)
        assert report.estimate == pytest.approx(-3.0 * window)

    def test_merge_equals_concatenated_stats(self):
        rng = np.random.default_rng(8)
        traces = [np.abs(rng.integers(0, 30, (400, 3))) for _ in range(3)]
        merged = est.drift_probe(traces, 5, n_boot=0)
        parts = [est.drift_parts(t, 5) for t in traces]
        total = sum(p.total for p in parts)
        n = sum(p.n for p in parts)
        assert merged.n_samples == n
        assert merged.estimate == pytest.approx(total / n)


class TestTailClassify:
    def test_geometric_sample(self):
        rng = np.random.default_rng(11)
        x = rng.geometric(1 / 6, size=100_000)  # mean 6
        report = est.tail_classify(x)
        assert report.classification == est.GEOMETRIC_LIKE

    def test_zeta_sample(self):
        spec = arr.bernoulli_zeta(1.0, 2.5)
        sampler = arr.make_sampler(spec)
        rng = rngmod.substream(12, 0, 1)
        x = np.array([sampler.draw(rng) for _ in range(100_000)])
        report = est.tail_classify(x)
        assert report.classification == est.POWER_LIKE
        assert abs(report.hill_exponent - 1.5) < 0.15

    def test_small_sample_inconclusive(self):
        report = est.tail_classify(np.arange(50))
        assert report.classification == est.INCONCLUSIVE

    def test_empty_sample(self):
        report = est.tail_classify(np.array([], dtype=np.int64))
        assert report.classification == est.INCONCLUSIVE
        assert report.n_exceedances == 0


def test_renewal_slots():
    trace = toy_trace([0, 1, 2], 3)
    np.testing.assert_array_equal(est.renewal_slots(trace), [0, 3, 6])
