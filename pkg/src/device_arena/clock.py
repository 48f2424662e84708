"""
Virtual clock and event loop.

Events pop in time order; ties resolve by kind (D2H completions first so that
freed memory is visible to admissions at the same instant, then H2D, then
compute) and finally by insertion order.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable, Optional


class OOMDeadlockError(RuntimeError):
    """Nothing can make progress: a required working set never fits the arena."""


class EventKind(IntEnum):
    D2H_COMPLETE = 0
    H2D_COMPLETE = 1
    COMPUTE_COMPLETE = 2


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    payload: Any = field(default=None, compare=False)


class VirtualClock:
    def __init__(self, start: float = 0.0):
        self.now = start
        self._queue: list[tuple[float, int, int, Event]] = []
        self._sequence = itertools.count()

    def __len__(self) -> int:
        return len(self._queue)

    def schedule(self, event: Event) -> Event:
        if event.time < self.now:
            raise ValueError(f"event at t={event.time} is in the past (now={self.now})")
        heapq.heappush(self._queue, (event.time, int(event.kind), next(self._sequence), event))
        return event

    def pop(self) -> Event:
        time, _, _, event = heapq.heappop(self._queue)
        self.now = time
        return event


def run_to_quiescence(
    clock: VirtualClock,
    handler: Optional[Callable[[Event], None]] = None,
    has_pending_work: Optional[Callable[[], bool]] = None,
) -> float:
    """
    Drain the event queue, invoking ``handler`` for each event in order.

    Returns:
        Virtual time of the last processed event (``clock.now`` if none).

    Raises:
        OOMDeadlockError: the queue is empty while ``has_pending_work`` still
            reports outstanding work.
    """
    while clock:
        event = clock.pop()
        if handler is not None:
            handler(event)
    if has_pending_work is not None and has_pending_work():
        raise OOMDeadlockError(
            f"no runnable event at t={clock.now:g} while work is still pending"
        )
    return clock.now
