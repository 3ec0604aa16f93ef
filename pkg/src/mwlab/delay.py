"""Per-file FCFS bookkeeping producing end-to-end delay series.

A positive batch arriving to a queue in one slot is a single file; its
delay runs from the slot right after it arrives until the slot in which
its last packet is removed.  A two-packet file arriving during slot t
and served during slots t+1 and t+2 has delay 2.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import List, Optional

from .core import StepRecord
from .errors import TraceOrderError


@dataclass
class FileRecord:
    queue: int
    k: int                  # arrival ordinal within the queue (0-based)
    arrival_slot: int
    size: int
    completion_slot: Optional[int] = None
    delay: Optional[int] = None

    @property
    def complete(self) -> bool:
        return self.completion_slot is not None


class DelayTracker:
    """Strictly sequential consumer of StepRecords."""

    def __init__(self, num_queues: int):
        self.num_queues = num_queues
        self._open = [deque() for _ in range(num_queues)]       # (FileRecord, remaining)
        self._completed: List[List[FileRecord]] = [[] for _ in range(num_queues)]
        self._arrival_count = [0] * num_queues
        self._cum_arrivals = [0] * num_queues
        self._next_slot: Optional[int] = None

    def on_step(self, record: StepRecord) -> None:
        if self._next_slot is not None and record.slot != self._next_slot:
            raise TraceOrderError(
                f"expected slot {self._next_slot}, got {record.slot}"
            )
        self._next_slot = record.slot + 1
        # removals happen during the slot, against files already present
        for i, s in enumerate(record.served):
            if s == 0:
                continue
            if not self._open[i]:
                raise TraceOrderError(
                    f"removal from queue {i} at slot {record.slot} with no open file"
                )
            entry = self._open[i][0]
            entry[1] -= 1
            if entry[1] == 0:
                rec = entry[0]
                rec.completion_slot = record.slot
                rec.delay = record.slot - rec.arrival_slot
                assert rec.delay >= 1, "files cannot complete in their arrival slot"
                self._completed[i].append(rec)
                self._open[i].popleft()
        # arrivals land at the end of the slot; a zero batch opens no file
        for i, a in enumerate(record.arrivals):
            if a > 0:
                rec = FileRecord(i, self._arrival_count[i], record.slot, a)
                self._arrival_count[i] += 1
                self._cum_arrivals[i] += a
                self._open[i].append([rec, a])

    def delays(self, queue: int) -> List[int]:
        """Completed delays so far, in completion order."""
        return [rec.delay for rec in self._completed[queue]]

    def files(self, queue: int) -> List[FileRecord]:
        return list(self._completed[queue])

    def open_packets(self, queue: int) -> int:
        return sum(rem for _, rem in self._open[queue])

    def completed_packets(self, queue: int) -> int:
        return sum(rec.size for rec in self._completed[queue])

    def cumulative_arrivals(self, queue: int) -> int:
        return self._cum_arrivals[queue]
