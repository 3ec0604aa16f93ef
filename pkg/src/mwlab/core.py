"""Slotted dynamics of a single-hop switched network under Max-Weight.

Within a slot: the scheduler picks a feasible 0/1 service vector based
on the queue lengths at the beginning of the slot, service attempts are
resolved against those lengths, and arrivals are appended afterwards
(a packet arriving in slot t is first eligible for service in slot t+1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import arrivals as arr
from . import rng as rngmod
from .errors import ConfigurationError


@dataclass(frozen=True)
class Schedule:
    """A feasible 0/1 service vector (one attempted packet per served queue)."""

    service: tuple

    def __post_init__(self):
        if any(s not in (0, 1) for s in self.service):
            raise ConfigurationError(f"schedule entries must be 0/1: {self.service}")


@dataclass(frozen=True)
class ScheduleSet:
    """Ordered collection of feasible schedules for a fixed queue count."""

    schedules: tuple
    num_queues: int

    def __post_init__(self):
        if self.num_queues <= 0:
            raise ConfigurationError("num_queues must be positive")
        seen = set()
        for s in self.schedules:
            if len(s.service) != self.num_queues:
                raise ConfigurationError(
                    f"schedule {s.service} has wrong length for {self.num_queues} queues"
                )
            if s.service in seen:
                raise ConfigurationError(f"duplicate schedule {s.service}")
            seen.add(s.service)
        if tuple([0] * self.num_queues) not in seen:
            raise ConfigurationError("schedule set must contain the all-zero schedule")

    def service_matrix(self) -> np.ndarray:
        return np.array([s.service for s in self.schedules], dtype=np.int64)


def schedule_set(vectors: Sequence[Sequence[int]], num_queues: Optional[int] = None) -> ScheduleSet:
    vectors = [tuple(int(x) for x in v) for v in vectors]
    n = num_queues if num_queues is not None else (len(vectors[0]) if vectors else 0)
    return ScheduleSet(tuple(Schedule(v) for v in vectors), n)


def default_schedule_set() -> ScheduleSet:
    """The 3-queue instance: serve {1,2} together, or {3}, or idle."""
    return schedule_set([(0, 0, 0), (1, 1, 0), (0, 0, 1)])


@dataclass
class QueueState:
    lengths: np.ndarray  # nonnegative ints, one per queue
    slot: int = 0

    def copy(self) -> "QueueState":
        return QueueState(self.lengths.copy(), self.slot)


@dataclass(frozen=True)
class StepRecord:
    slot: int
    arrivals: tuple
    schedule_index: int
    served: tuple        # actual removals, i.e. attempts on nonempty queues
    pre_lengths: tuple
    post_lengths: tuple


def max_weight_select(state: QueueState, sset: ScheduleSet, rng: np.random.Generator) -> int:
    """Index of a schedule maximizing sum_i Q_i * S_i.

    Ties among the weight-maximizers are broken uniformly with exactly
    one uniform draw; no draw is consumed when the maximizer is unique.
    """
    q = state.lengths
    if len(q) != sset.num_queues:
        raise ConfigurationError(
            f"state has {len(q)} queues but schedule set expects {sset.num_queues}"
        )
    weights = [sum(int(qi) * si for qi, si in zip(q, s.service)) for s in sset.schedules]
    wmax = max(weights)
    maximizers = [i for i, w in enumerate(weights) if w == wmax]
    if len(maximizers) == 1:
        return maximizers[0]
    u = rng.random()
    return maximizers[min(int(u * len(maximizers)), len(maximizers) - 1)]


def step(state: QueueState, arrivals_vec, schedule: Schedule, schedule_index: int = -1):
    """Advance one slot: serve against current lengths, then add arrivals."""
    pre = tuple(int(x) for x in state.lengths)
    a = tuple(int(x) for x in arrivals_vec)
    if len(a) != len(pre) or len(schedule.service) != len(pre):
        raise ConfigurationError("dimension mismatch in step")
    if any(x < 0 for x in a):
        raise ConfigurationError(f"negative arrivals {a}")
    served = tuple(s if (s and q > 0) else 0 for s, q in zip(schedule.service, pre))
    post = tuple(q + ai - si for q, ai, si in zip(pre, a, served))
    new_state = QueueState(np.array(post, dtype=np.int64), state.slot + 1)
    record = StepRecord(state.slot, a, schedule_index, served, pre, post)
    return new_state, record


def run_steps(
    specs: Sequence[arr.ArrivalSpec],
    sset: ScheduleSet,
    horizon: int,
    master_seed: int,
    replication: int = 0,
    initial_lengths: Optional[Sequence[int]] = None,
) -> Iterator[StepRecord]:
    """Reference trace generator: max_weight_select / sample / step per slot.

    Deterministic given (specs, sset, horizon, master_seed, replication,
    initial_lengths).  This is the general, pure-Python path; see
    :mod:`mwlab.kernels` for the compiled fast path used by long runs.
    """
    if horizon < 1:
        raise ConfigurationError(f"horizon {horizon} must be >= 1")
    if len(specs) != sset.num_queues:
        raise ConfigurationError("one arrival spec per queue is required")
    init = [0] * sset.num_queues if initial_lengths is None else list(initial_lengths)
    if len(init) != sset.num_queues or any(x < 0 for x in init):
        raise ConfigurationError(f"bad initial lengths {init}")
    state = QueueState(np.array(init, dtype=np.int64), 0)
    sched_rng = rngmod.scheduler_stream(master_seed, replication)
    arrival_rngs = [rngmod.arrival_stream(master_seed, replication, i) for i in range(sset.num_queues)]
    samplers = [arr.make_sampler(s) for s in specs]
    for _ in range(horizon):
        idx = max_weight_select(state, sset, sched_rng)
        a = [samplers[i].draw(arrival_rngs[i]) for i in range(sset.num_queues)]
        state, record = step(state, a, sset.schedules[idx], idx)
        yield record
