"""
Directional transfer channels.

Each direction is an independent FIFO: a request starts once the channel is
idle and every request issued before it has completed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

from src.device_arena.arena import ArenaConfig
from src.device_arena.clock import Event, EventKind


class Direction(str, Enum):
    HOST_TO_DEVICE = "h2d"
    DEVICE_TO_HOST = "d2h"


class TransferMode(str, Enum):
    SEQUENTIAL = "sequential"
    BATCH = "batch"


@dataclass(frozen=True)
class TransferRequest:
    direction: Direction
    items: tuple[int, ...]
    mode: TransferMode = TransferMode.BATCH
    issue_time: float = 0.0
    tag: Any = None

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("a transfer request needs at least one layer")
        if len(set(self.items)) != len(self.items):
            raise ValueError(f"duplicate layers in transfer request: {self.items}")
        if self.issue_time < 0:
            raise ValueError("issue_time must be >= 0")


def bandwidth_for(direction: Direction, config: ArenaConfig) -> float:
    if direction is Direction.HOST_TO_DEVICE:
        return config.h2d_bandwidth
    return config.d2h_bandwidth


def transfer_duration(request: TransferRequest, sizes: Sequence[int], config: ArenaConfig) -> float:
    """
    Sequential: every layer is its own call and pays the per-call latency.
    Batch: one call for the whole group.
    """
    if len(sizes) != len(request.items):
        raise ValueError(f"{len(sizes)} sizes given for {len(request.items)} layers")
    bandwidth = bandwidth_for(request.direction, config)
    latency = config.per_call_latency
    if request.mode is TransferMode.SEQUENTIAL:
        return sum(latency + size / bandwidth for size in sizes)
    return latency + sum(sizes) / bandwidth


class TransferChannel:
    def __init__(self, direction: Direction, config: ArenaConfig):
        self.direction = direction
        self.config = config
        self.busy_until = 0.0

    @property
    def completion_kind(self) -> EventKind:
        if self.direction is Direction.HOST_TO_DEVICE:
            return EventKind.H2D_COMPLETE
        return EventKind.D2H_COMPLETE

    def is_idle(self, now: float) -> bool:
        return self.busy_until <= now

    def enqueue(self, request: TransferRequest, sizes: Sequence[int], payload: Any = None) -> Event:
        """Queue ``request`` behind earlier ones and return its completion event."""
        if request.direction is not self.direction:
            raise ValueError(f"{request.direction.value} request on {self.direction.value} channel")
        start = max(request.issue_time, self.busy_until)
        self.busy_until = start + transfer_duration(request, sizes, self.config)
        return Event(self.busy_until, self.completion_kind, payload if payload is not None else request)
