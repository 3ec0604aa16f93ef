"""Compiled fast path for the default 3-queue Max-Weight instance.

Consumes randomness identically to :func:`mwlab.core.run_steps` (same
substreams, same draw order, same inverse-CDF transforms), so for
supported configurations both paths produce the same trace bit for bit;
``tests/test_fast_consistency.py`` asserts this.  Long-horizon
experiments use this path; everything else falls back to the reference
implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from . import arrivals as arr
from . import rng as rngmod
from .core import ScheduleSet
from .errors import ConfigurationError

_KIND_BERNOULLI = 0
_KIND_GEOMETRIC = 1
_KIND_ZETA = 2
_KIND_CONST = 3

_EMPTY_CDF = np.zeros(1, dtype=np.float64)


def supports(specs: Sequence[arr.ArrivalSpec], sset: ScheduleSet) -> bool:
    if sset.num_queues != 3:
        return False
    if tuple(s.service for s in sset.schedules) != ((0, 0, 0), (1, 1, 0), (0, 0, 1)):
        return False
    return all(s.law in ("bernoulli", "geometric", "bernoulli_zeta") for s in specs)


def _encode(spec: arr.ArrivalSpec):
    if spec.law == "bernoulli":
        return _KIND_BERNOULLI, spec.params[0], 0.0, _EMPTY_CDF
    if spec.law == "geometric":
        m = spec.params[0]
        q = m / (1.0 + m) if m > 0.0 else 0.0
        return _KIND_GEOMETRIC, q, 0.0, _EMPTY_CDF
    if spec.law == "bernoulli_zeta":
        p, s = spec.params
        return _KIND_ZETA, p, s, arr.zeta_cdf_table(s)
    if spec.law == "deterministic" and len(spec.params) == 1:
        return _KIND_CONST, float(spec.params[0]), 0.0, _EMPTY_CDF
    raise ConfigurationError(f"law {spec.law!r} not supported by the fast path")


@njit(inline="always")
def _draw(kind, p0, p1, cdf, rng):
    if kind == 0:  # bernoulli(p0)
        return 1 if rng.random() < p0 else 0
    if kind == 1:  # geometric with success parameter q = p0
        if p0 == 0.0:
            rng.random()
            return 0
        u = rng.random()
        k = math.ceil(math.log1p(-u) / math.log(p0)) - 1
        if k < 0:
            k = 0
        return int(k)
    if kind == 3:  # constant batch of size p0
        return int(p0)
    # bernoulli_zeta(p0, p1) with inverse-CDF table + analytic power tail
    if rng.random() >= p0:
        return 0
    u = rng.random()
    idx = np.searchsorted(cdf, u)
    n = cdf.shape[0]
    if idx < n:
        return int(idx + 1)
    v = (1.0 - u) / (1.0 - cdf[n - 1])
    k = int(math.floor((n + 0.5) * v ** (-1.0 / (p1 - 1.0)) + 0.5))
    if k < n + 1:
        k = n + 1
    return k


@njit(cache=True)
def _kernel3(horizon, init0, init1, init2,
             k0, a0p0, a0p1, cdf0,
             k1, a1p0, a1p1, cdf1,
             k2, a2p0, a2p1, cdf2,
             rng_sched, rng_a0, rng_a1, rng_a2,
             track_queue, record_flows):
    lengths = np.empty((horizon + 1, 3), dtype=np.int32)
    nflow = horizon if record_flows else 1
    sched = np.zeros(nflow, dtype=np.int8)
    arrivals_out = np.zeros((nflow, 3), dtype=np.int32)
    served_out = np.zeros((nflow, 3), dtype=np.int32)

    cap = horizon + 1
    file_slot = np.empty(cap, dtype=np.int64)
    file_rem = np.empty(cap, dtype=np.int64)
    file_size = np.empty(cap, dtype=np.int64)
    comp_arrival = np.empty(cap, dtype=np.int64)
    comp_size = np.empty(cap, dtype=np.int64)
    comp_delay = np.empty(cap, dtype=np.int64)
    head = 0
    tail = 0
    ncomp = 0

    q0, q1, q2 = init0, init1, init2
    lengths[0, 0], lengths[0, 1], lengths[0, 2] = q0, q1, q2

    for t in range(horizon):
        # Max-Weight over the fixed set {(0,0,0), (1,1,0), (0,0,1)}
        w1 = q0 + q1
        w2 = q2
        wmax = w1 if w1 > w2 else w2
        if wmax < 0:
            wmax = 0
        m0 = 1 if wmax == 0 else 0
        m1 = 1 if w1 == wmax else 0
        m2 = 1 if w2 == wmax else 0
        kties = m0 + m1 + m2
        if kties == 1:
            idx = 0 if m0 else (1 if m1 else 2)
        else:
            u = rng_sched.random()
            pick = int(u * kties)
            if pick > kties - 1:
                pick = kties - 1
            # walk the maximizers in schedule order
            idx = -1
            seen = 0
            if m0:
                if seen == pick:
                    idx = 0
                seen += 1
            if idx < 0 and m1:
                if seen == pick:
                    idx = 1
                seen += 1
            if idx < 0:
                idx = 2

        s0 = 1 if (idx == 1 and q0 > 0) else 0
        s1 = 1 if (idx == 1 and q1 > 0) else 0
        s2 = 1 if (idx == 2 and q2 > 0) else 0
        q0 -= s0
        q1 -= s1
        q2 -= s2

        if track_queue >= 0:
            served_tracked = s0 if track_queue == 0 else (s1 if track_queue == 1 else s2)
            if served_tracked == 1 and head < tail:
                file_rem[head] -= 1
                if file_rem[head] == 0:
                    comp_arrival[ncomp] = file_slot[head]
                    comp_size[ncomp] = file_size[head]
                    comp_delay[ncomp] = t - file_slot[head]
                    ncomp += 1
                    head += 1

        a0 = _draw(k0, a0p0, a0p1, cdf0, rng_a0)
        a1 = _draw(k1, a1p0, a1p1, cdf1, rng_a1)
        a2 = _draw(k2, a2p0, a2p1, cdf2, rng_a2)
        q0 += a0
        q1 += a1
        q2 += a2

        if track_queue >= 0:
            a_tracked = a0 if track_queue == 0 else (a1 if track_queue == 1 else a2)
            if a_tracked > 0:
                file_slot[tail] = t
                file_rem[tail] = a_tracked
                file_size[tail] = a_tracked
                tail += 1

        lengths[t + 1, 0], lengths[t + 1, 1], lengths[t + 1, 2] = q0, q1, q2
        if record_flows:
            sched[t] = idx
            arrivals_out[t, 0], arrivals_out[t, 1], arrivals_out[t, 2] = a0, a1, a2
            served_out[t, 0], served_out[t, 1], served_out[t, 2] = s0, s1, s2

    return (lengths, sched, arrivals_out, served_out,
            comp_arrival[:ncomp], comp_size[:ncomp], comp_delay[:ncomp])


@dataclass
class FastTrace:
    """Arrays produced by one compiled replication.

    ``lengths[t]`` is Q at the beginning of slot t, t = 0..horizon.
    File arrays cover the tracked queue's completed files, in
    completion order.
    """

    lengths: np.ndarray
    sched: Optional[np.ndarray]
    arrivals: Optional[np.ndarray]
    served: Optional[np.ndarray]
    file_arrival_slot: np.ndarray
    file_size: np.ndarray
    file_delay: np.ndarray


def run_fast(
    specs: Sequence[arr.ArrivalSpec],
    sset: ScheduleSet,
    horizon: int,
    master_seed: int,
    replication: int = 0,
    initial_lengths: Optional[Sequence[int]] = None,
    track_queue: int = -1,
    record_flows: bool = False,
) -> FastTrace:
    if horizon < 1:
        raise ConfigurationError(f"horizon {horizon} must be >= 1")
    if not supports(specs, sset):
        raise ConfigurationError("configuration not supported by the fast path")
    init = [0, 0, 0] if initial_lengths is None else [int(x) for x in initial_lengths]
    if len(init) != 3 or any(x < 0 for x in init):
        raise ConfigurationError(f"bad initial lengths {init}")
    if track_queue >= 0 and init[track_queue] > 0:
        raise ConfigurationError("delay tracking requires the tracked queue to start empty")
    enc = [_encode(s) for s in specs]
    out = _kernel3(
        int(horizon), init[0], init[1], init[2],
        enc[0][0], enc[0][1], enc[0][2], enc[0][3],
        enc[1][0], enc[1][1], enc[1][2], enc[1][3],
        enc[2][0], enc[2][1], enc[2][2], enc[2][3],
        rngmod.scheduler_stream(master_seed, replication),
        rngmod.arrival_stream(master_seed, replication, 0),
        rngmod.arrival_stream(master_seed, replication, 1),
        rngmod.arrival_stream(master_seed, replication, 2),
        int(track_queue), bool(record_flows),
    )
    lengths, sched, arrivals_out, served_out, f_arr, f_size, f_delay = out
    return FastTrace(
        lengths=lengths,
        sched=sched if record_flows else None,
        arrivals=arrivals_out if record_flows else None,
        served=served_out if record_flows else None,
        file_arrival_slot=f_arr,
        file_size=f_size,
        file_delay=f_delay,
    )
