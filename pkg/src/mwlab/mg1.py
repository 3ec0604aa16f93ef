"""Discrete-time single-server workload bench (Bernoulli arrivals).

Lindley recursion W(t+1) = [W(t) + B(t) * S(t) - 1]^+ with B(t) a
Bernoulli(p) coin and S(t) drawn from a pluggable service law.  With a
stable load and heavy-tailed service (finite 1+gamma moment only), the
mean workload started from empty grows without bound but sublinearly,
no faster than t^(1/(1+gamma)); this bench measures the growth exponent
on a geometric time ladder and checks it against that bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from . import arrivals as arr
from . import rng as rngmod
from .errors import ConfigurationError
from .kernels import _draw, _encode

DEFAULT_LADDER = tuple(int(round(10 ** (e / 2.0))) for e in range(6, 15))  # 1e3 .. 1e7

SCALING_SLACK = 0.1          # tolerance added to the 1/(1+gamma) bound
MIN_FIT_POINTS = 5
SATURATION_RATIO = 2.0       # last/first ladder ratio below this counts as saturated


@njit(cache=True)
def _lindley_kernel(horizon, p, kind, s0, s1, cdf, ladder, w0, rng):
    out = np.empty(len(ladder), dtype=np.float64)
    w = w0
    j = 0
    for t in range(horizon):
        if rng.random() < p:
            w += _draw(kind, s0, s1, cdf, rng)
        if w > 0:
            w -= 1
        t1 = t + 1
        while j < len(ladder) and ladder[j] == t1:
            out[j] = w
            j += 1
    while j < len(ladder):
        out[j] = w
        j += 1
    return out


@dataclass
class WorkloadTrace:
    slots: np.ndarray
    mean_w: np.ndarray
    stderr: np.ndarray
    replications: int
    service_tail_class: str
    load: float

    def to_json(self) -> dict:
        return {
            "slots": [int(t) for t in self.slots],
            "mean_w": [float(x) for x in self.mean_w],
            "stderr": [float(x) for x in self.stderr],
            "replications": self.replications,
            "service_tail_class": self.service_tail_class,
            "load": self.load,
        }


@dataclass
class ScalingReport:
    beta: Optional[float]        # fitted log-log growth exponent
    beta_stderr: Optional[float]
    r_squared: Optional[float]
    gamma: float
    bound: float                 # 1 / (1 + gamma)
    passed: Optional[bool]       # beta in (0.05, bound + slack]
    saturated: bool

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "beta_stderr": self.beta_stderr,
            "r_squared": self.r_squared,
            "gamma": self.gamma,
            "bound": self.bound,
            "passed": self.passed,
            "saturated": self.saturated,
        }


def simulate_workload(
    arrival_p: float,
    service_law: arr.ArrivalSpec,
    horizon: int,
    replications: int,
    master_seed: int,
    ladder: Optional[Sequence[int]] = None,
    initial_workload: int = 0,
) -> WorkloadTrace:
    """Mean workload at ladder slots, averaged across replications."""
    if not 0.0 <= arrival_p <= 1.0:
        raise ConfigurationError(f"arrival probability {arrival_p} outside [0, 1]")
    load = arrival_p * service_law.declared_mean
    if load >= 1.0:
        raise ConfigurationError(f"unstable bench: load {load:.4g} >= 1")
    if replications < 1 or horizon < 1:
        raise ConfigurationError("replications and horizon must be >= 1")
    if ladder is None:
        ladder = [t for t in DEFAULT_LADDER if t <= horizon]
    ladder_arr = np.asarray(sorted(set(int(t) for t in ladder)), dtype=np.int64)
    if len(ladder_arr) == 0 or ladder_arr[0] < 1 or ladder_arr[-1] > horizon:
        raise ConfigurationError(f"ladder {ladder} must lie within [1, horizon]")
    kind, s0, s1, cdf = _encode(service_law)
    per_rep = np.empty((replications, len(ladder_arr)))
    for rep in range(replications):
        rng = rngmod.substream(master_seed, rep, 2000)
        per_rep[rep] = _lindley_kernel(
            int(horizon), float(arrival_p), kind, s0, s1, cdf,
            ladder_arr, int(initial_workload), rng,
        )
    mean_w = per_rep.mean(axis=0)
    stderr = (
        per_rep.std(axis=0, ddof=1) / math.sqrt(replications)
        if replications > 1 else np.zeros(len(ladder_arr))
    )
    return WorkloadTrace(ladder_arr, mean_w, stderr, replications, service_law.tail_class, load)


def fit_scaling(trace: WorkloadTrace, gamma: float) -> ScalingReport:
    """Log-log growth exponent over the top half of the ladder."""
    if len(trace.slots) < MIN_FIT_POINTS:
        raise ConfigurationError(
            f"need at least {MIN_FIT_POINTS} ladder points, got {len(trace.slots)}"
        )
    if gamma <= 0.0:
        raise ConfigurationError("gamma must be positive")
    bound = 1.0 / (1.0 + gamma)
    first, last = trace.mean_w[0], trace.mean_w[-1]
    saturated = trace.service_tail_class != arr.HEAVY or (
        first >= 0 and last <= SATURATION_RATIO * max(first, 1e-12)
    )
    if saturated:
        return ScalingReport(None, None, None, gamma, bound, None, True)
    k = len(trace.slots) // 2
    x = np.log(trace.slots[k:].astype(np.float64))
    w = trace.mean_w[k:]
    if np.any(w <= 0):
        return ScalingReport(None, None, None, gamma, bound, None, True)
    y = np.log(w)
    sy = trace.stderr[k:] / w
    xbar = x.mean()
    sxx = ((x - xbar) ** 2).sum()
    beta = ((x - xbar) * y).sum() / sxx
    beta_se = math.sqrt((((x - xbar) / sxx) ** 2 * sy**2).sum())
    yhat = y.mean() + beta * (x - xbar)
    ss_res = ((y - yhat) ** 2).sum()
    ss_tot = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    passed = (0.05 < beta <= bound + SCALING_SLACK)
    return ScalingReport(float(beta), float(beta_se), float(r2), gamma, bound, passed, False)
