"""Analytic classification of arrival-rate vectors for the 3-queue instance.

Stability requires nonnegative time shares mu12 (schedule {1,2}) and
mu3 (schedule {3}) with max(rate1, rate2) <= mu12, rate3 <= mu3 and
mu12 + mu3 < 1; eliminating the shares, membership reduces to
max(rate1, rate2) + rate3 < 1 (pick mu12, mu3 just above the two lower
bounds when the sum is below 1; conversely the three inequalities chain
into max(rate1, rate2) + rate3 <= mu12 + mu3 < 1).

Within the stability region, with queue 1 heavy-tailed and queues 2-3
light-tailed: queues 1 and 3 have infinite expected steady-state delay
for every rate vector, while queue 2 flips at rate2 = (1+rate1-rate3)/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import DomainError

DELAY_STABLE = "delay_stable"
DELAY_UNSTABLE = "delay_unstable"
BOUNDARY = "boundary"
NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    witness: Optional[Tuple[float, float]]   # (mu12, mu3) when stable
    slack: float                             # 1 - max(r1, r2) - r3

    def to_json(self) -> dict:
        return {
            "stable": self.stable,
            "witness": list(self.witness) if self.witness else None,
            "slack": self.slack,
        }


@dataclass(frozen=True)
class RegionVerdict:
    stable: bool
    threshold: float                         # (1 + rate1 - rate3) / 2
    queue_verdicts: Tuple[str, str, str]

    def to_json(self) -> dict:
        return {
            "stable": self.stable,
            "threshold": self.threshold,
            "queue_verdicts": list(self.queue_verdicts),
        }


def _check_rates(lam: Sequence[float]) -> Tuple[float, float, float]:
    if len(lam) != 3:
        raise DomainError(f"expected 3 rates, got {len(lam)}")
    rates = tuple(float(x) for x in lam)
    if any(x <= 0.0 for x in rates):
        raise DomainError(f"arrival rates must be strictly positive: {rates}")
    return rates


def in_stability_region(lam: Sequence[float]) -> StabilityResult:
    """Membership test with an explicit feasibility witness."""
    l1, l2, l3 = _check_rates(lam)
    gap = 1.0 - max(l1, l2) - l3
    if gap <= 0.0:
        return StabilityResult(False, None, gap)
    mu12 = max(l1, l2) + gap / 2.0
    mu3 = l3 + gap / 4.0
    return StabilityResult(True, (mu12, mu3), gap)


def classify(lam: Sequence[float], heavy_queue: int = 0) -> RegionVerdict:
    """Per-queue delay-stability verdicts (queue indices 0-based).

    Assumes the modeled traffic assignment: the heavy-tailed stream
    feeds queue 1 (index 0) and the other two streams are light-tailed.
    """
    l1, l2, l3 = _check_rates(lam)
    if heavy_queue != 0:
        raise DomainError("only the queue-1-heavy assignment is modeled")
    threshold = (1.0 + l1 - l3) / 2.0
    result = in_stability_region(lam)
    if not result.stable:
        return RegionVerdict(False, threshold, (NOT_APPLICABLE,) * 3)
    # float tolerance so e.g. rate2 = 0.45 vs (1 + 0.2 - 0.3) / 2 lands on the boundary
    tol = 1e-12 * max(1.0, abs(threshold))
    if l2 > threshold + tol:
        q2 = DELAY_UNSTABLE
    elif l2 < threshold - tol:
        q2 = DELAY_STABLE
    else:
        q2 = BOUNDARY
    return RegionVerdict(True, threshold, (DELAY_UNSTABLE, q2, DELAY_UNSTABLE))
