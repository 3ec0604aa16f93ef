"""IID batch-arrival laws with exact means and declared tail classes.

Supported laws (all on the nonnegative integers):

* ``bernoulli(p)``        -- 0/1 arrivals, mean p
* ``geometric(mean)``     -- geometric number of packets on {0,1,2,...}
* ``poisson(rate)``       -- Poisson batch sizes
* ``bernoulli_zeta(p,s)`` -- 0 w.p. 1-p, else a zeta(s) batch on {1,2,...};
                             with s in (2,3) the mean is finite but the
                             second moment is infinite (heavy-tailed)
* ``deterministic(seq)``  -- periodic deterministic batch sizes

Each draw consumes a fixed number of uniforms from the supplied
generator (one, except bernoulli_zeta which uses a second uniform only
when the thinning coin lands heads, and deterministic which uses none),
so pure-Python and compiled simulation paths produce identical traces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import zeta as riemann_zeta

from .errors import ConfigurationError

HEAVY = "heavy"
EXPONENTIAL_TYPE = "exponential_type"

# Inverse-CDF table length for zeta batch sizes; beyond this the tail is
# sampled from the analytic power-law survival approximation.  For
# s in (2,3) the table already covers all but ~1e-9 of the mass.
ZETA_TABLE_SIZE = 1_000_000

_MEAN_TOL = 1e-12


@dataclass(frozen=True)
class MomentReport:
    """Analytic moments of an arrival law."""

    mean: float
    second_moment: float  # math.inf when the law is heavy-tailed
    gamma_max: float      # sup{g : E[A^(1+g)] < inf}; inf for exponential-type laws


@dataclass(frozen=True)
class ArrivalSpec:
    """One queue's IID batch-arrival law.

    ``declared_mean`` must equal the analytic mean of the law to within
    1e-12; use the module-level constructors rather than building
    instances by hand.
    """

    law: str
    params: tuple
    declared_mean: float
    tail_class: str

    def __post_init__(self):
        report = analytic_moments(self)
        if not math.isclose(report.mean, self.declared_mean, rel_tol=0.0, abs_tol=_MEAN_TOL):
            raise ConfigurationError(
                f"declared_mean {self.declared_mean!r} does not match analytic "
                f"mean {report.mean!r} of {self.law}{self.params}"
            )
        heavy = math.isinf(report.second_moment)
        if heavy != (self.tail_class == HEAVY):
            raise ConfigurationError(
                f"tail_class {self.tail_class!r} inconsistent with second "
                f"moment of {self.law}{self.params}"
            )

    def to_json(self) -> dict:
        return {"law": self.law, "params": list(self.params)}

    @staticmethod
    def from_json(obj: dict) -> "ArrivalSpec":
        law = obj.get("law")
        params = obj.get("params", [])
        ctor = {
            "bernoulli": bernoulli,
            "geometric": geometric,
            "poisson": poisson,
            "bernoulli_zeta": bernoulli_zeta,
            "deterministic": lambda *p: deterministic(list(p)),
        }.get(law)
        if ctor is None:
            raise ConfigurationError(f"unknown arrival law {law!r}")
        return ctor(*params)


def bernoulli(p: float) -> ArrivalSpec:
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"bernoulli probability {p} outside [0, 1]")
    return ArrivalSpec("bernoulli", (float(p),), float(p), EXPONENTIAL_TYPE)


def geometric(mean: float) -> ArrivalSpec:
    if mean < 0.0:
        raise ConfigurationError(f"geometric mean {mean} must be nonnegative")
    return ArrivalSpec("geometric", (float(mean),), float(mean), EXPONENTIAL_TYPE)


def poisson(rate: float) -> ArrivalSpec:
    if rate < 0.0:
        raise ConfigurationError(f"poisson rate {rate} must be nonnegative")
    return ArrivalSpec("poisson", (float(rate),), float(rate), EXPONENTIAL_TYPE)


def bernoulli_zeta(p: float, s: float) -> ArrivalSpec:
    if not 2.0 < s < 3.0:
        raise ConfigurationError(
            f"bernoulli_zeta exponent s={s} must lie in (2, 3) for a finite "
            "mean with infinite second moment"
        )
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"bernoulli_zeta probability {p} outside [0, 1]")
    mean = p * riemann_zeta(s - 1.0) / riemann_zeta(s)
    return ArrivalSpec("bernoulli_zeta", (float(p), float(s)), float(mean), HEAVY)


def deterministic(pattern) -> ArrivalSpec:
    pattern = tuple(int(x) for x in pattern)
    if not pattern or any(x < 0 for x in pattern):
        raise ConfigurationError("deterministic pattern must be a nonempty list of nonnegative ints")
    mean = sum(pattern) / len(pattern)
    return ArrivalSpec("deterministic", pattern, float(mean), EXPONENTIAL_TYPE)


def analytic_moments(spec: ArrivalSpec) -> MomentReport:
    """Closed-form mean / second moment / largest finite (1+gamma) moment."""
    law, params = spec.law, spec.params
    if law == "bernoulli":
        (p,) = params
        return MomentReport(p, p, math.inf)
    if law == "geometric":
        (m,) = params
        if m == 0.0:
            return MomentReport(0.0, 0.0, math.inf)
        q = m / (1.0 + m)  # P(K=k) = (1-q) q^k
        second = q * (1.0 + q) / (1.0 - q) ** 2
        return MomentReport(m, second, math.inf)
    if law == "poisson":
        (r,) = params
        return MomentReport(r, r + r * r, math.inf)
    if law == "bernoulli_zeta":
        p, s = params
        mean = p * riemann_zeta(s - 1.0) / riemann_zeta(s)
        # E[K^2] requires convergence of sum k^(2-s); divergent for s <= 3
        return MomentReport(mean, math.inf, s - 2.0)
    if law == "deterministic":
        mean = sum(params) / len(params)
        second = sum(x * x for x in params) / len(params)
        return MomentReport(float(mean), float(second), math.inf)
    raise ConfigurationError(f"unknown arrival law {law!r}")


def calibrate_rate(target_mean: float, law_family: str, **shape) -> ArrivalSpec:
    """Spec of the given family whose analytic mean equals ``target_mean``."""
    if target_mean < 0.0:
        raise ConfigurationError(f"target mean {target_mean} must be nonnegative")
    if law_family == "bernoulli":
        if target_mean > 1.0:
            raise ConfigurationError(f"bernoulli cannot reach mean {target_mean} > 1")
        return bernoulli(target_mean)
    if law_family == "geometric":
        return geometric(target_mean)
    if law_family == "poisson":
        return poisson(target_mean)
    if law_family == "bernoulli_zeta":
        s = shape.get("s")
        if s is None:
            raise ConfigurationError("bernoulli_zeta calibration requires shape parameter s")
        max_mean = riemann_zeta(s - 1.0) / riemann_zeta(s)
        p = target_mean / max_mean
        if p > 1.0:
            raise ConfigurationError(
                f"bernoulli_zeta(s={s}) cannot reach mean {target_mean}; "
                f"maximum is {max_mean:.6g}"
            )
        return bernoulli_zeta(p, s)
    raise ConfigurationError(f"unknown law family {law_family!r}")


@lru_cache(maxsize=8)
def zeta_cdf_table(s: float) -> np.ndarray:
    """Cumulative P(K <= k) for k = 1..ZETA_TABLE_SIZE under zeta(s)."""
    k = np.arange(1, ZETA_TABLE_SIZE + 1, dtype=np.float64)
    pmf = k ** (-s) / riemann_zeta(s)
    return np.cumsum(pmf)


def zeta_tail_inverse(v: float, s: float, kmax: int = ZETA_TABLE_SIZE) -> int:
    """Inverse of the conditional survival of K given K > kmax.

    Uses the Euler-Maclaurin leading term of the zeta tail,
    sum_{j>k} j^-s ~ (k + 1/2)^(1-s) / (s-1), which makes the
    conditional survival a pure power law in (k + 1/2).
    """
    k = int(math.floor((kmax + 0.5) * v ** (-1.0 / (s - 1.0)) + 0.5))
    return max(k, kmax + 1)


class Sampler:
    """Stateful draw interface; stateless for all laws but deterministic."""

    def __init__(self, spec: ArrivalSpec):
        self.spec = spec
        self._law = spec.law
        self._params = spec.params
        self._phase = 0
        if self._law == "geometric":
            (m,) = spec.params
            self._q = m / (1.0 + m) if m > 0.0 else 0.0
        elif self._law == "bernoulli_zeta":
            _, s = spec.params
            self._cdf = zeta_cdf_table(s)

    def draw(self, rng: np.random.Generator) -> int:
        law = self._law
        if law == "bernoulli":
            return 1 if rng.random() < self._params[0] else 0
        if law == "geometric":
            if self._q == 0.0:
                rng.random()
                return 0
            u = rng.random()
            k = math.ceil(math.log1p(-u) / math.log(self._q)) - 1
            return max(int(k), 0)
        if law == "poisson":
            r = self._params[0]
            u = rng.random()
            k, cdf, pmf = 0, math.exp(-r), math.exp(-r)
            while u > cdf and k < 10_000:
                k += 1
                pmf *= r / k
                cdf += pmf
            return k
        if law == "bernoulli_zeta":
            p, s = self._params
            if rng.random() >= p:
                return 0
            u = rng.random()
            idx = int(np.searchsorted(self._cdf, u, side="left"))
            if idx < len(self._cdf):
                return idx + 1
            v = (1.0 - u) / (1.0 - self._cdf[-1])
            return zeta_tail_inverse(v, s)
        if law == "deterministic":
            value = self._params[self._phase]
            self._phase = (self._phase + 1) % len(self._params)
            return int(value)
        raise ConfigurationError(f"unknown arrival law {law!r}")


def make_sampler(spec: ArrivalSpec) -> Sampler:
    return Sampler(spec)


def sample(spec_or_sampler, rng: np.random.Generator) -> int:
    """One draw from a spec (stateless laws) or an existing sampler."""
    if isinstance(spec_or_sampler, Sampler):
        return spec_or_sampler.draw(rng)
    return Sampler(spec_or_sampler).draw(rng)
