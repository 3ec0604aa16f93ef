"""Replication runner binding simulation, delay tracking and estimators.

Each replication produces an order-independent summary (renewal-cycle
aggregates, queue-length histograms, drift blocks, delay series); the
experiment merges summaries and runs the diagnostics once on the merged
aggregates, so results do not depend on execution order or thread
count.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import estimators as est
from . import kernels
from .config import SimConfig, parse_config
from .core import run_steps
from .delay import DelayTracker
from .errors import DomainError
from .region import classify

THREADS_ENV = "MAXWEIGHT_LAB_THREADS"


@dataclass
class ReplicationSummary:
    rep: int
    horizon: int
    trace_digest: str
    n_cycles: int
    cycle_lens: np.ndarray             # batched consecutive-cycle lengths
    rewards: List[np.ndarray]          # per queue: (n_batches, n_levels) reward sums
    time_avg: np.ndarray               # (n_queues, n_levels) plain time averages
    counts: List[np.ndarray]           # per queue: histogram of Q values
    drift: est.DriftParts
    delay_agg: est.SeriesAgg           # tracked queue's completed file delays
    file_arrival_slot: np.ndarray      # populated only when the delay CSV is kept
    file_size: np.ndarray
    file_delay: np.ndarray


def _collect_lengths_pure(config: SimConfig, rep: int):
    n = config.sched.num_queues
    lengths = np.empty((config.horizon + 1, n), dtype=np.int64)
    init = config.initial_lengths or (0,) * n
    lengths[0] = init
    tracker = DelayTracker(n)
    track_ok = init[config.probes.track_delay_queue] == 0
    for record in run_steps(
        config.arrivals, config.sched, config.horizon,
        config.master_seed, rep, config.initial_lengths,
    ):
        lengths[record.slot + 1] = record.post_lengths
        if track_ok:
            tracker.on_step(record)
    q = config.probes.track_delay_queue
    files = tracker.files(q) if track_ok else []
    return (
        lengths,
        np.array([f.delay for f in files], dtype=np.int64),
        np.array([f.arrival_slot for f in files], dtype=np.int64),
        np.array([f.size for f in files], dtype=np.int64),
    )


def summarize_replication(config: SimConfig, rep: int) -> ReplicationSummary:
    q_track = config.probes.track_delay_queue
    init = config.initial_lengths or (0,) * config.sched.num_queues
    use_fast = kernels.supports(config.arrivals, config.sched) and init[q_track] == 0
    if use_fast:
        trace = kernels.run_fast(
            config.arrivals, config.sched, config.horizon, config.master_seed,
            replication=rep, initial_lengths=config.initial_lengths,
            track_queue=q_track,
        )
        lengths = trace.lengths
        delays = trace.file_delay
        f_slot, f_size = trace.file_arrival_slot, trace.file_size
    else:
        lengths, delays, f_slot, f_size = _collect_lengths_pure(config, rep)

    levels = np.asarray(config.probes.truncated_mean_levels, dtype=np.int64)
    n_queues = config.sched.num_queues
    rewards = []
    cycle_lens = None
    n_cycles = 0
    time_avg = np.empty((n_queues, len(levels)))
    counts = []
    for q in range(n_queues):
        lens, rew = est.cycle_aggregates(lengths, q, levels)
        cycle_lens, rew, n_cycles = est.batch_cycles(lens, rew)
        rewards.append(rew)
        col = lengths[:, q]
        time_avg[q] = [np.minimum(col, m).mean() for m in levels]
        counts.append(np.bincount(col))
    drift = est.drift_parts(lengths, config.probes.drift_window)
    digest = hashlib.sha256(np.ascontiguousarray(lengths).tobytes()).hexdigest()
    keep_files = config.write_delay_csv
    empty = np.zeros(0, dtype=np.int64)
    return ReplicationSummary(
        rep=rep,
        horizon=config.horizon,
        trace_digest=digest,
        n_cycles=n_cycles,
        cycle_lens=cycle_lens,
        rewards=rewards,
        time_avg=time_avg,
        counts=counts,
        drift=drift,
        delay_agg=est.series_aggregate(delays, levels),
        file_arrival_slot=np.asarray(f_slot, dtype=np.int64) if keep_files else empty,
        file_size=np.asarray(f_size, dtype=np.int64) if keep_files else empty,
        file_delay=np.asarray(delays, dtype=np.int64) if keep_files else empty,
    )


def _worker(config_json: dict, rep: int) -> ReplicationSummary:
    return summarize_replication(parse_config(config_json), rep)


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def _merge_counts(count_arrays: List[np.ndarray]) -> np.ndarray:
    size = max(len(c) for c in count_arrays)
    out = np.zeros(size, dtype=np.int64)
    for c in count_arrays:
        out[: len(c)] += c
    return out


@dataclass
class ExperimentResult:
    config: SimConfig
    summaries: List[ReplicationSummary]
    queue_curves: List[est.TruncatedMeanCurve]
    queue_divergence: List[str]
    queue_tails: List[est.TailReport]
    delay_curve: est.TruncatedMeanCurve
    delay_divergence: str
    drift: est.DriftProbeReport
    region_verdict: Optional[object]

    def to_json(self) -> dict:
        cfg = self.config
        return {
            "schema_version": 1,
            "config_digest": cfg.digest(),
            "master_seed": cfg.master_seed,
            "horizon": cfg.horizon,
            "replications": cfg.replications,
            "rates": list(cfg.rates),
            "region": None if self.region_verdict is None else self.region_verdict.to_json(),
            "queues": [
                {
                    "queue": q,
                    "truncated_mean": self.queue_curves[q].to_json(),
                    # finite-sample heuristic surrogate for delay (in)stability,
                    # not a proof of either
                    "divergence_heuristic": self.queue_divergence[q],
                    "tail": self.queue_tails[q].to_json(),
                }
                for q in range(len(self.queue_curves))
            ],
            "delay_series": {
                "queue": cfg.probes.track_delay_queue,
                "n_files": int(self.delay_curve.n_cycles),
                "truncated_mean": self.delay_curve.to_json(),
                "divergence_heuristic": self.delay_divergence,
            },
            "drift": self.drift.to_json(),
            "replication_digests": [s.trace_digest for s in self.summaries],
        }


def run_experiment(config: SimConfig, threads: Optional[int] = None) -> ExperimentResult:
    threads = default_threads() if threads is None else max(int(threads), 1)
    reps = list(range(config.replications))
    if threads > 1 and len(reps) > 1:
        cfg_json = config.to_json()
        with ProcessPoolExecutor(max_workers=threads) as pool:
            summaries = list(pool.map(_worker, [cfg_json] * len(reps), reps))
    else:
        summaries = [summarize_replication(config, r) for r in reps]
    summaries.sort(key=lambda s: s.rep)

    levels = np.asarray(config.probes.truncated_mean_levels, dtype=np.int64)
    n_queues = config.sched.num_queues
    total_slots = sum(s.horizon + 1 for s in summaries)
    queue_curves, queue_div, queue_tails = [], [], []
    all_cycle_lens = np.concatenate([s.cycle_lens for s in summaries])
    total_cycles = sum(s.n_cycles for s in summaries)
    for q in range(n_queues):
        rew = np.concatenate([s.rewards[q] for s in summaries], axis=0)
        time_avg = sum(s.time_avg[q] * (s.horizon + 1) for s in summaries) / total_slots
        curve = est.truncated_mean_from_aggregates(
            all_cycle_lens, rew, levels, time_averages=time_avg,
            seed=config.master_seed, n_cycles=total_cycles,
        )
        queue_curves.append(curve)
        queue_div.append(est.classify_divergence(curve))
        queue_tails.append(
            est.tail_classify_counts(*_counts_to_vc(_merge_counts([s.counts[q] for s in summaries])))
        )

    delay_curve = est.truncated_mean_from_series(
        [s.delay_agg for s in summaries], levels, seed=config.master_seed
    )
    delay_div = est.classify_divergence(delay_curve)
    drift = est.drift_probe_from_parts(
        [s.drift for s in summaries], config.probes.drift_window, seed=config.master_seed
    )
    try:
        verdict = classify(config.rates)
    except DomainError:
        verdict = None
    return ExperimentResult(
        config=config,
        summaries=summaries,
        queue_curves=queue_curves,
        queue_divergence=queue_div,
        queue_tails=queue_tails,
        delay_curve=delay_curve,
        delay_divergence=delay_div,
        drift=drift,
        region_verdict=verdict,
    )


def _counts_to_vc(counts: np.ndarray):
    values = np.arange(len(counts))
    mask = counts > 0
    return values[mask], counts[mask]
