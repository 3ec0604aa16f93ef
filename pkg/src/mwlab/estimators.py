"""Steady-state diagnostics on simulated traces.

Inputs are queue-length arrays of shape (T+1, 3) (row t = Q at the
beginning of slot t) or plain sample series (delays, marginals).
Renewal epochs are the slots where the whole system is empty; cycles
between consecutive epochs are IID, which grounds the renewal-reward
truncated-mean estimator and its bootstrap errors.

The divergence classifier is a finite-sample heuristic surrogate for
"infinite mean" (no finite-sample test can prove finiteness); reports
label it as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

FINITE = "finite"
DIVERGING = "diverging"
INCONCLUSIVE = "inconclusive"

GEOMETRIC_LIKE = "geometric_like"
POWER_LIKE = "power_like"

# Divergence thresholds are toolkit conventions: a last-step relative
# increase under 5% counts as saturation, a top-half log-log slope above
# 0.2 (with CI excluding 0) counts as divergence.
SATURATION_REL_INCREASE = 0.05
DIVERGENCE_LOGLOG_SLOPE = 0.2

MIN_CYCLES = 30
MIN_EXCEEDANCES = 1000


def lyapunov_value(lengths) -> np.ndarray:
    """3*Q2 + [Q3 - Q1 - Q2]^+ for a single state or an array of states."""
    a = np.asarray(lengths, dtype=np.int64)
    if a.shape[-1] != 3:
        raise ValueError("lyapunov_value expects 3-queue states")
    q1, q2, q3 = a[..., 0], a[..., 1], a[..., 2]
    v = 3 * q2 + np.maximum(q3 - q1 - q2, 0)
    if a.ndim == 1:
        return int(v)
    return v


def renewal_slots(lengths: np.ndarray) -> np.ndarray:
    """Slots t with Q(t) = 0 (system-wide empty)."""
    return np.flatnonzero((np.asarray(lengths) == 0).all(axis=1))


@dataclass
class TruncatedMeanCurve:
    levels: np.ndarray
    estimates: np.ndarray          # renewal-reward ratio estimates of E[min(X, M)]
    stderrs: np.ndarray
    n_cycles: int
    time_averages: Optional[np.ndarray] = None  # plain time-average cross-check
    inconclusive: bool = False
    # top-half log-log slope CI from the same bootstrap resamples; the
    # per-level estimates are strongly correlated, so this is far
    # tighter than combining per-level stderrs
    slope_ci_lo: Optional[float] = None
    slope_ci_hi: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "levels": [int(m) for m in self.levels],
            "estimates": [float(x) for x in self.estimates],
            "stderrs": [float(x) for x in self.stderrs],
            "n_cycles": int(self.n_cycles),
            "time_averages": None if self.time_averages is None
            else [float(x) for x in self.time_averages],
            "inconclusive": bool(self.inconclusive),
            "slope_ci_lo": self.slope_ci_lo,
            "slope_ci_hi": self.slope_ci_hi,
        }


def cycle_aggregates(lengths: np.ndarray, queue: int, levels) -> tuple:
    """(cycle_lengths, per-cycle reward sums) for rewards min(Q_queue, M).

    Only complete cycles (between consecutive renewal epochs) contribute.
    """
    levels = np.asarray(levels, dtype=np.int64)
    q = np.asarray(lengths)[:, queue]
    renewals = renewal_slots(lengths)
    if len(renewals) < 2:
        return np.zeros(0, dtype=np.int64), np.zeros((0, len(levels)), dtype=np.int64)
    cycle_lens = np.diff(renewals).astype(np.int64)
    span = q[: renewals[-1]]
    rewards = np.empty((len(cycle_lens), len(levels)), dtype=np.int64)
    for j, m in enumerate(levels):
        clipped = np.minimum(span, m).astype(np.int64)
        rewards[:, j] = np.add.reduceat(clipped, renewals[:-1])
    return cycle_lens, rewards


def batch_cycles(cycle_lens, rewards, max_batches: int = 1000):
    """Compress per-cycle aggregates into sums over consecutive batches.

    The pooled ratio estimate is unchanged; bootstrap errors operate on
    batch sums either way.  Returns (lens, rewards, true_cycle_count).
    """
    n = len(cycle_lens)
    if n <= 10 * max_batches:
        return cycle_lens, rewards, n
    edges = np.linspace(0, n, max_batches + 1).astype(np.int64)
    lens = np.add.reduceat(cycle_lens, edges[:-1])
    rews = np.add.reduceat(rewards, edges[:-1], axis=0)
    return lens, rews, n


def _top_half_slope(levels, estimates) -> Optional[float]:
    """Plain least-squares slope of log(estimate) vs log(M), top half."""
    n = len(levels)
    k = max(2, (n + 1) // 2)
    x = np.log(np.asarray(levels[-k:], dtype=np.float64))
    e = np.asarray(estimates[-k:], dtype=np.float64)
    if np.any(e <= 0):
        return None
    xbar = x.mean()
    sxx = ((x - xbar) ** 2).sum()
    if sxx == 0:
        return None
    return float(((x - xbar) * np.log(e)).sum() / sxx)


def _slope_ci_from_boot(levels, boot_estimates):
    slopes = [_top_half_slope(levels, e) for e in boot_estimates]
    slopes = [s for s in slopes if s is not None]
    if len(slopes) < max(len(boot_estimates) // 2, 20):
        return None, None
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    return float(lo), float(hi)


def _ratio_bootstrap(cycle_lens, rewards, levels, n_boot, seed):
    n = len(cycle_lens)
    if n == 0 or n_boot <= 0:
        return np.zeros(rewards.shape[1]), None, None
    # batch consecutive cycles when there are many; bootstrap over IID
    # batch sums is equivalent for the ratio and far cheaper
    if n > 10_000:
        nb = 1000
        edges = np.linspace(0, n, nb + 1).astype(np.int64)
        lens = np.add.reduceat(cycle_lens, edges[:-1])
        rews = np.add.reduceat(rewards, edges[:-1], axis=0)
    else:
        lens, rews = cycle_lens, rewards
    m = len(lens)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(77,))))
    est = np.empty((n_boot, rewards.shape[1]))
    for b in range(n_boot):
        idx = rng.integers(0, m, m)
        est[b] = rews[idx].sum(axis=0) / max(lens[idx].sum(), 1)
    lo, hi = _slope_ci_from_boot(levels, est)
    return est.std(axis=0, ddof=1), lo, hi


def truncated_mean_from_aggregates(
    cycle_lens: np.ndarray,
    rewards: np.ndarray,
    levels,
    time_averages=None,
    n_boot: int = 200,
    seed: int = 0,
    n_cycles: Optional[int] = None,
) -> TruncatedMeanCurve:
    levels = np.asarray(levels, dtype=np.int64)
    n = len(cycle_lens) if n_cycles is None else int(n_cycles)
    if n == 0:
        nan = np.full(len(levels), np.nan)
        return TruncatedMeanCurve(levels, nan, nan.copy(), 0, time_averages, True)
    estimates = rewards.sum(axis=0) / cycle_lens.sum()
    stderrs, slope_lo, slope_hi = _ratio_bootstrap(cycle_lens, rewards, levels, n_boot, seed)
    return TruncatedMeanCurve(
        levels, estimates, stderrs, n, time_averages,
        inconclusive=n < MIN_CYCLES, slope_ci_lo=slope_lo, slope_ci_hi=slope_hi,
    )


def truncated_mean(
    lengths: np.ndarray,
    queue: int,
    levels,
    n_boot: int = 200,
    seed: int = 0,
) -> TruncatedMeanCurve:
    """Renewal-reward estimate of E[min(Q_queue, M)] per truncation level."""
    levels = np.asarray(levels, dtype=np.int64)
    q = np.asarray(lengths)[:, queue]
    time_avg = np.array([np.minimum(q, m).mean() for m in levels])
    cycle_lens, rewards = cycle_aggregates(lengths, queue, levels)
    return truncated_mean_from_aggregates(
        cycle_lens, rewards, levels, time_averages=time_avg, n_boot=n_boot, seed=seed
    )


def truncated_mean_samples(
    samples,
    levels,
    n_boot: int = 200,
    seed: int = 0,
    block_len: Optional[int] = None,
) -> TruncatedMeanCurve:
    """Truncated-mean curve for a plain series (e.g. per-file delays).

    Standard errors come from a moving-block bootstrap, since delay
    series are correlated within busy episodes.
    """
    x = np.asarray(samples, dtype=np.int64)
    levels = np.asarray(levels, dtype=np.int64)
    n = len(x)
    if n == 0:
        nan = np.full(len(levels), np.nan)
        return TruncatedMeanCurve(levels, nan, nan.copy(), 0, None, True)
    clipped = np.stack([np.minimum(x, m) for m in levels], axis=1).astype(np.float64)
    estimates = clipped.mean(axis=0)
    if block_len is None:
        block_len = max(int(math.sqrt(n)), 1)
    nb = n // block_len
    slope_lo = slope_hi = None
    if nb >= 2 and n_boot > 0:
        edges = np.arange(nb) * block_len
        block_means = np.add.reduceat(clipped, edges, axis=0)[:nb] / block_len
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(78,))))
        boot = np.empty((n_boot, len(levels)))
        for b in range(n_boot):
            idx = rng.integers(0, nb, nb)
            boot[b] = block_means[idx].mean(axis=0)
        stderrs = boot.std(axis=0, ddof=1)
        slope_lo, slope_hi = _slope_ci_from_boot(levels, boot)
    else:
        stderrs = np.zeros(len(levels))
    return TruncatedMeanCurve(levels, estimates, stderrs, n, None,
                              inconclusive=n < MIN_CYCLES,
                              slope_ci_lo=slope_lo, slope_ci_hi=slope_hi)


@dataclass
class SeriesAgg:
    """Order-independent truncated-sum aggregates of one sample series."""

    n: int
    level_sums: np.ndarray         # (n_levels,) sums of min(x, M)
    block_sums: np.ndarray         # (n_blocks, n_levels) consecutive-block sums
    block_counts: np.ndarray       # (n_blocks,)


def series_aggregate(samples, levels, max_blocks: int = 1000) -> SeriesAgg:
    x = np.asarray(samples, dtype=np.int64)
    levels = np.asarray(levels, dtype=np.int64)
    n = len(x)
    if n == 0:
        return SeriesAgg(0, np.zeros(len(levels)),
                         np.zeros((0, len(levels))), np.zeros(0, dtype=np.int64))
    clipped = np.stack([np.minimum(x, m) for m in levels], axis=1).astype(np.float64)
    nb = min(max_blocks, n)
    edges = np.linspace(0, n, nb + 1).astype(np.int64)
    block_sums = np.add.reduceat(clipped, edges[:-1], axis=0)
    return SeriesAgg(n, clipped.sum(axis=0), block_sums, np.diff(edges))


def truncated_mean_from_series(
    aggs: Sequence[SeriesAgg], levels, n_boot: int = 200, seed: int = 0
) -> TruncatedMeanCurve:
    """Merge per-replication series aggregates into one curve.

    Standard errors from a block bootstrap over the concatenated
    consecutive-block sums (series are correlated within busy episodes).
    """
    levels = np.asarray(levels, dtype=np.int64)
    n = sum(a.n for a in aggs)
    if n == 0:
        nan = np.full(len(levels), np.nan)
        return TruncatedMeanCurve(levels, nan, nan.copy(), 0, None, True)
    sums = np.sum([a.level_sums for a in aggs if a.n], axis=0)
    estimates = sums / n
    bs = np.concatenate([a.block_sums for a in aggs if a.n])
    bc = np.concatenate([a.block_counts for a in aggs if a.n]).astype(np.float64)
    nb = len(bs)
    slope_lo = slope_hi = None
    if nb >= 2 and n_boot > 0:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(78,))))
        boot = np.empty((n_boot, len(levels)))
        for b in range(n_boot):
            idx = rng.integers(0, nb, nb)
            boot[b] = bs[idx].sum(axis=0) / bc[idx].sum()
        stderrs = boot.std(axis=0, ddof=1)
        slope_lo, slope_hi = _slope_ci_from_boot(levels, boot)
    else:
        stderrs = np.zeros(len(levels))
    return TruncatedMeanCurve(levels, estimates, stderrs, n, None, n < MIN_CYCLES,
                              slope_ci_lo=slope_lo, slope_ci_hi=slope_hi)


def _loglog_slope(levels, estimates, stderrs):
    """Weighted slope of log(estimate) vs log(M) over the top half."""
    n = len(levels)
    k = max(2, (n + 1) // 2)
    x = np.log(np.asarray(levels[-k:], dtype=np.float64))
    e = np.asarray(estimates[-k:], dtype=np.float64)
    if np.any(e <= 0):
        return 0.0, 0.0
    y = np.log(e)
    sy = np.asarray(stderrs[-k:], dtype=np.float64) / e
    xbar = x.mean()
    sxx = ((x - xbar) ** 2).sum()
    if sxx == 0:
        return 0.0, 0.0
    slope = ((x - xbar) * y).sum() / sxx
    se = math.sqrt((((x - xbar) / sxx) ** 2 * sy**2).sum())
    return slope, se


def classify_divergence(curve: TruncatedMeanCurve) -> str:
    """`finite` when the curve has saturated, `diverging` when it keeps
    rising in M, else `inconclusive`."""
    if len(curve.levels) < 4:
        raise ValueError("classify_divergence needs at least 4 ladder points")
    if curve.inconclusive or np.any(np.isnan(curve.estimates)):
        return INCONCLUSIVE
    e = curve.estimates
    se = curve.stderrs
    if e[-1] <= 0:
        return FINITE  # identically-zero reward saturates trivially
    diff = e[-1] - e[-2]
    se_comb = math.sqrt(se[-1] ** 2 + se[-2] ** 2)
    if e[-2] > 0 and (diff + 2.0 * se_comb) < SATURATION_REL_INCREASE * e[-2]:
        return FINITE
    slope, slope_se = _loglog_slope(curve.levels, e, se)
    if curve.slope_ci_lo is not None:
        # bootstrap slope CI (accounts for cross-level correlation)
        if slope > DIVERGENCE_LOGLOG_SLOPE and curve.slope_ci_lo > 0.0:
            return DIVERGING
        return INCONCLUSIVE
    if slope > DIVERGENCE_LOGLOG_SLOPE and slope - 2.0 * slope_se > 0.0:
        return DIVERGING
    return INCONCLUSIVE


@dataclass
class DriftProbeReport:
    window: int                    # look-ahead T, in slots
    alpha: int                     # qualifying threshold, 6T
    n_samples: int
    estimate: Optional[float]      # mean of V(t+T) - V(t) over qualifying t
    ci_lo: Optional[float]
    ci_hi: Optional[float]
    case1_n: int = 0               # Q2(t) > T
    case1_mean: Optional[float] = None
    case2_n: int = 0               # Q3(t) > Q1(t) + Q2(t) + 3T
    case2_mean: Optional[float] = None
    inconclusive: bool = True

    def to_json(self) -> dict:
        return {
            "window": self.window,
            "alpha": self.alpha,
            "n_samples": self.n_samples,
            "estimate": self.estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "case1_n": self.case1_n,
            "case1_mean": self.case1_mean,
            "case2_n": self.case2_n,
            "case2_mean": self.case2_mean,
            "inconclusive": self.inconclusive,
        }


@dataclass
class DriftParts:
    """Order-independent per-replication drift aggregates."""

    n: int = 0
    total: float = 0.0
    case1_n: int = 0
    case1_sum: float = 0.0
    case2_n: int = 0
    case2_sum: float = 0.0
    block_sums: np.ndarray = field(default_factory=lambda: np.zeros(0))
    block_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def drift_parts(lengths: np.ndarray, window: int) -> DriftParts:
    """Collect qualifying-slot drift sums from one trace.

    Qualifying slots have V(t) > 6*window; sums are kept per time block
    of length 10*window so confidence intervals can use a block
    bootstrap after merging replications.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    alpha = 6 * window
    block = 10 * window
    parts = DriftParts()
    v = lyapunov_value(lengths)
    if len(v) <= window:
        return parts
    t_end = len(v) - window
    qual = np.flatnonzero(v[:t_end] > alpha)
    if len(qual) == 0:
        return parts
    delta = (v[qual + window] - v[qual]).astype(np.float64)
    q1 = np.asarray(lengths)[qual, 0].astype(np.int64)
    q2 = np.asarray(lengths)[qual, 1].astype(np.int64)
    q3 = np.asarray(lengths)[qual, 2].astype(np.int64)
    c1 = q2 > window
    c2 = q3 > q1 + q2 + 3 * window
    bid = qual // block
    _, start = np.unique(bid, return_index=True)
    parts.n = len(qual)
    parts.total = float(delta.sum())
    parts.case1_n = int(c1.sum())
    parts.case1_sum = float(delta[c1].sum())
    parts.case2_n = int(c2.sum())
    parts.case2_sum = float(delta[c2].sum())
    parts.block_sums = np.add.reduceat(delta, start)
    parts.block_counts = np.diff(np.append(start, len(delta))).astype(np.int64)
    return parts


def drift_probe_from_parts(
    parts_list: Sequence[DriftParts], window: int, n_boot: int = 1000, seed: int = 0
) -> DriftProbeReport:
    alpha = 6 * window
    n_total = sum(p.n for p in parts_list)
    if n_total == 0:
        return DriftProbeReport(window, alpha, 0, None, None, None, inconclusive=True)
    sum_total = sum(p.total for p in parts_list)
    c1_n = sum(p.case1_n for p in parts_list)
    c1_sum = sum(p.case1_sum for p in parts_list)
    c2_n = sum(p.case2_n for p in parts_list)
    c2_sum = sum(p.case2_sum for p in parts_list)
    estimate = sum_total / n_total
    bs = np.concatenate([p.block_sums for p in parts_list])
    bc = np.concatenate([p.block_counts for p in parts_list]).astype(np.float64)
    nb = len(bs)
    if nb >= 2 and n_boot > 0:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(79,))))
        reps = np.empty(n_boot)
        for b in range(n_boot):
            idx = rng.integers(0, nb, nb)
            reps[b] = bs[idx].sum() / bc[idx].sum()
        ci_lo, ci_hi = np.quantile(reps, [0.025, 0.975])
    else:
        ci_lo = ci_hi = estimate
    return DriftProbeReport(
        window, alpha, n_total, estimate, float(ci_lo), float(ci_hi),
        case1_n=c1_n,
        case1_mean=(c1_sum / c1_n) if c1_n else None,
        case2_n=c2_n,
        case2_mean=(c2_sum / c2_n) if c2_n else None,
        inconclusive=False,
    )


def drift_probe(traces, window: int, n_boot: int = 1000, seed: int = 0) -> DriftProbeReport:
    """Conditional T-slot drift of the piecewise-linear Lyapunov value.

    ``traces`` is one (T+1, 3) array or a list of them (independent
    replications); every qualifying slot contributes (overlapping
    windows, samples correlated by construction).
    """
    if isinstance(traces, np.ndarray):
        traces = [traces]
    parts = [drift_parts(lengths, window) for lengths in traces]
    return drift_probe_from_parts(parts, window, n_boot=n_boot, seed=seed)


@dataclass
class TailReport:
    classification: str
    exponent: Optional[float]      # Hill tail index for power_like, decay
                                   # rate per unit for geometric_like
    r2_geometric: Optional[float]
    r2_power: Optional[float]
    n_exceedances: int
    hill_exponent: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "classification": self.classification,
            "exponent": self.exponent,
            "r2_geometric": self.r2_geometric,
            "r2_power": self.r2_power,
            "n_exceedances": self.n_exceedances,
            "hill_exponent": self.hill_exponent,
        }


def _r2(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xbar, ybar = x.mean(), y.mean()
    sxx = ((x - xbar) ** 2).sum()
    syy = ((y - ybar) ** 2).sum()
    if sxx == 0 or syy == 0:
        return 0.0, 0.0
    sxy = ((x - xbar) * (y - ybar)).sum()
    slope = sxy / sxx
    return slope, (sxy * sxy) / (sxx * syy)


def hill_exponent_from_counts(values: np.ndarray, counts: np.ndarray, top_frac: float = 0.01):
    """Hill tail-index estimate from the top ``top_frac`` order statistics."""
    order = np.argsort(values)[::-1]
    v = np.asarray(values, dtype=np.float64)[order]
    c = np.asarray(counts, dtype=np.int64)[order]
    n = int(c.sum())
    k = max(int(top_frac * n), 10)
    if n <= k:
        return None
    cum = np.cumsum(c)
    # value of the (k+1)-th largest observation
    kth_idx = int(np.searchsorted(cum, k + 1))
    if kth_idx >= len(v):
        return None
    x_k = v[kth_idx]
    if x_k <= 0:
        return None
    take = np.minimum(c, np.maximum(k - np.concatenate(([0], cum[:-1])), 0))[: kth_idx + 1]
    logs = np.log(v[: kth_idx + 1] / x_k)
    mean_log = (take * logs).sum() / k
    if mean_log <= 0:
        return None
    return 1.0 / mean_log


def tail_classify_counts(values, counts, margin: float = 0.01) -> TailReport:
    """Classify the upper tail as geometric-like or power-like.

    Fits log-survival against x (geometric) and against log x (power)
    over the exceedances above the 90th percentile and compares
    goodness-of-fit; the winner must lead by ``margin`` in R^2.
    """
    values = np.asarray(values, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.int64)
    order = np.argsort(values)
    values, counts = values[order], counts[order]
    n = int(counts.sum())
    if n == 0:
        return TailReport(INCONCLUSIVE, None, None, None, 0)
    cum = np.cumsum(counts)
    q90_idx = int(np.searchsorted(cum, math.ceil(0.9 * n)))
    x0 = values[min(q90_idx, len(values) - 1)]
    mask = values > x0
    n_exc = int(counts[mask].sum())
    if n_exc < MIN_EXCEEDANCES:
        return TailReport(INCONCLUSIVE, None, None, None, n_exc)
    v = values[mask]
    surv = (n - cum[mask]).astype(np.float64) / n_exc  # P(X > v | X > x0), up to the top point
    keep = surv > 0
    v, surv = v[keep], surv[keep]
    if len(v) < 3 or np.any(v <= 0):
        return TailReport(INCONCLUSIVE, None, None, None, n_exc)
    ln_s = np.log(surv)
    slope_g, r2_g = _r2(v, ln_s)
    slope_p, r2_p = _r2(np.log(v), ln_s)
    hill = hill_exponent_from_counts(values, counts)
    if r2_g - r2_p > margin:
        return TailReport(GEOMETRIC_LIKE, -slope_g, r2_g, r2_p, n_exc, hill)
    if r2_p - r2_g > margin:
        exponent = hill if hill is not None else -slope_p
        return TailReport(POWER_LIKE, exponent, r2_g, r2_p, n_exc, hill)
    return TailReport(INCONCLUSIVE, None, r2_g, r2_p, n_exc, hill)


def tail_classify(samples, margin: float = 0.01) -> TailReport:
    values, counts = np.unique(np.asarray(samples), return_counts=True)
    return tail_classify_counts(values, counts, margin=margin)
