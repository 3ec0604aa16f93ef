"""Deterministic fluid trajectory for the big-burst scenario.

Closed forms for the law-of-large-numbers caricature of the system
after queue 1 receives a burst of b packets at time 0 with all queues
otherwise near their average behavior:

* phase 1 (buildup): queues 1 and 2 are served every slot while queue 3
  starves and grows, until its length catches the sum of the other two
  at time T1 = b / (1 + rate3 - rate1);
* phase 2 (balanced drain): Max-Weight keeps the two schedule weights
  equal; queues 1 and 3 drain at rates mu1 = mu2, mu3 with
  mu1 + mu3 = 1, until one of them empties at time T2.

Queue 2 grows during phase 2 exactly when rate2 exceeds the balanced
service rate, which happens iff rate2 > (1 + rate1 - rate3) / 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import arrivals as arr
from . import kernels
from .core import default_schedule_set
from .errors import DomainError
from .region import in_stability_region

BURST_SIZE_RECOMMENDED = 10_000


@dataclass(frozen=True)
class FluidTrajectory:
    b: float
    T1: float
    T2: float
    q1_T1: float
    q3_T1: float
    mu: tuple                   # (mu1, mu2, mu3) phase-2 service rates
    q2_growth_rate: float
    q2_peak: float
    phase2_emptier: str         # "queue1" or "queue3"

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "T1": self.T1,
            "T2": self.T2,
            "q1_T1": self.q1_T1,
            "q3_T1": self.q3_T1,
            "mu": list(self.mu),
            "q2_growth_rate": self.q2_growth_rate,
            "q2_peak": self.q2_peak,
            "phase2_emptier": self.phase2_emptier,
        }


def fluid_burst(lam: Sequence[float], b: float) -> FluidTrajectory:
    """Fluid trajectory constants for a burst of ``b`` packets to queue 1."""
    l1, l2, l3 = (float(x) for x in lam)
    verdict = in_stability_region((l1, l2, l3))
    if not verdict.stable:
        raise DomainError(f"rates {lam} outside the stability region")
    if l2 >= 1.0:
        raise DomainError("fluid trajectory requires rate2 < 1")
    denom1 = 1.0 + l3 - l1
    if denom1 <= 0.0:
        raise DomainError("degenerate phase-1 denominator 1 + rate3 - rate1 <= 0")
    if b < 0.0:
        raise DomainError(f"burst size {b} must be nonnegative")

    t1 = b / denom1
    q3_t1 = l3 * t1
    q1_t1 = b - (1.0 - l1) * t1

    mu2_cand = (1.0 + l1 + l2 - l3) / 3.0
    if l2 > mu2_cand:
        # queue 2 stays positive: all three rates set by the weight balance
        mu1 = mu2 = mu2_cand
    else:
        # queue 2 sits at 0 (effective departures rate2); balance the
        # (Q1, Q3) pair only: rate1 - mu1 = rate3 - mu3, mu1 + mu3 = 1
        mu1 = mu2 = (1.0 + l1 - l3) / 2.0
    mu3 = 1.0 - mu1
    q2_growth = max(l2 - mu2, 0.0)

    if b == 0.0:
        return FluidTrajectory(0.0, 0.0, 0.0, 0.0, 0.0, (mu1, mu2, mu3), q2_growth, 0.0, "queue1")

    candidates = {}
    if mu1 - l1 > 0.0:
        candidates["queue1"] = q1_t1 / (mu1 - l1)
    if mu3 - l3 > 0.0:
        candidates["queue3"] = q3_t1 / (mu3 - l3)
    if not candidates:
        raise DomainError("degenerate phase-2 drain rates: neither queue empties")
    emptier = min(candidates, key=lambda k: candidates[k])
    t2 = t1 + candidates[emptier]
    q2_peak = q2_growth * (t2 - t1)
    return FluidTrajectory(float(b), t1, t2, q1_t1, q3_t1, (mu1, mu2, mu3), q2_growth, q2_peak, emptier)


@dataclass
class BurstComparison:
    """Simulated burst episode vs the fluid constants, one row per seed."""

    fluid: FluidTrajectory
    seeds: list
    t1_hat: list
    q3_t1_hat: list
    mu_hat: list                  # per-seed (mu1, mu2, mu3) over [T1_hat, T2_hat)
    q2_t2_hat: list
    t1_rel_err: list
    mu2_abs_err: list
    q2_peak_over_b: list
    high_variance: bool           # burst too small for the tolerances to mean much

    def medians(self) -> dict:
        med = lambda xs: float(np.median(np.asarray(xs, dtype=np.float64)))
        return {
            "t1_rel_err": med(self.t1_rel_err),
            "mu2_hat": med([m[1] for m in self.mu_hat]),
            "mu2_abs_err": med(self.mu2_abs_err),
            "q2_peak_over_b": med(self.q2_peak_over_b),
        }

    def to_json(self) -> dict:
        return {
            "fluid": self.fluid.to_json(),
            "high_variance": self.high_variance,
            "medians": self.medians(),
            "per_seed": [
                {
                    "seed": s,
                    "t1_hat": t1,
                    "q3_t1_hat": q3,
                    "mu_hat": list(mu),
                    "q2_t2_hat": q2,
                    "t1_rel_err": e1,
                    "mu2_abs_err": e2,
                    "q2_peak_over_b": qb,
                }
                for s, t1, q3, mu, q2, e1, e2, qb in zip(
                    self.seeds, self.t1_hat, self.q3_t1_hat, self.mu_hat,
                    self.q2_t2_hat, self.t1_rel_err, self.mu2_abs_err,
                    self.q2_peak_over_b,
                )
            ],
        }


def _default_burst_specs(lam, heavy_s: float):
    l1, l2, l3 = lam
    return [
        arr.calibrate_rate(l1, "bernoulli_zeta", s=heavy_s),
        arr.calibrate_rate(l2, "bernoulli"),
        arr.calibrate_rate(l3, "bernoulli"),
    ]


def compare_to_simulation(
    lam: Sequence[float],
    b: int,
    seeds: Sequence[int],
    heavy_s: float = 2.5,
    specs=None,
) -> BurstComparison:
    """Burst-conditioned simulation against the fluid constants.

    The system starts with ``b`` packets in queue 1 and all else empty;
    queue 1 keeps receiving its heavy-tailed stream, queues 2 and 3
    their light-tailed streams.  Measures the weight-crossing time, the
    queue-3 level there, phase-2 service rates, and the queue-2 level
    when queue 1 or 3 first empties.
    """
    traj = fluid_burst(lam, b)
    if specs is None:
        specs = _default_burst_specs(lam, heavy_s)
    sset = default_schedule_set()
    horizon = int(2.5 * max(traj.T2, 1.0)) + 10_000

    rows = {k: [] for k in ("t1", "q3", "mu", "q2", "e1", "e2", "qb")}
    used_seeds = []
    for seed in seeds:
        trace = kernels.run_fast(
            specs, sset, horizon, int(seed),
            initial_lengths=(int(b), 0, 0), record_flows=True,
        )
        lengths = trace.lengths.astype(np.int64)
        q1s, q2s, q3s = lengths[:, 0], lengths[:, 1], lengths[:, 2]
        crossing = np.flatnonzero(q3s[1:] >= q1s[1:] + q2s[1:])
        if len(crossing) == 0:
            continue
        t1_hat = int(crossing[0] + 1)
        empty = np.flatnonzero((q1s[t1_hat + 1:] * q3s[t1_hat + 1:]) == 0)
        if len(empty) == 0:
            continue
        t2_hat = int(empty[0] + t1_hat + 1)
        span = max(t2_hat - t1_hat, 1)
        mu_hat = trace.served[t1_hat:t2_hat].sum(axis=0) / span
        used_seeds.append(int(seed))
        rows["t1"].append(t1_hat)
        rows["q3"].append(int(q3s[t1_hat]))
        rows["mu"].append(tuple(float(m) for m in mu_hat))
        rows["q2"].append(int(q2s[t2_hat]))
        rows["e1"].append(abs(t1_hat - traj.T1) / traj.T1 if traj.T1 > 0 else 0.0)
        rows["e2"].append(abs(float(mu_hat[1]) - traj.mu[1]))
        rows["qb"].append(q2s[t2_hat] / b if b > 0 else 0.0)

    return BurstComparison(
        fluid=traj,
        seeds=used_seeds,
        t1_hat=rows["t1"],
        q3_t1_hat=rows["q3"],
        mu_hat=rows["mu"],
        q2_t2_hat=rows["q2"],
        t1_rel_err=rows["e1"],
        mu2_abs_err=rows["e2"],
        q2_peak_over_b=rows["qb"],
        high_variance=b < BURST_SIZE_RECOMMENDED,
    )
