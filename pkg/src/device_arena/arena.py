"""
Bounded device memory with an allocation ledger.

The arena never waits: ``alloc`` either admits the request or raises
``InsufficientCapacity`` and the caller decides whether to retry later or give
up with an OOM-deadlock.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from enum import Enum

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class InsufficientCapacity(Exception):
    """The allocation does not fit right now."""

    def __init__(self, requested: int, resident: int, capacity: int):
        super().__init__(
            f"cannot admit {requested} B: {resident} B resident of {capacity} B capacity"
        )
        self.requested = requested
        self.resident = resident
        self.capacity = capacity


class ArenaUsageError(RuntimeError):
    """Double free or unknown handle: a bug in the caller, not an OOM."""


class MemoryKind(str, Enum):
    WEIGHT = "weight"
    ACTIVATION = "activation"
    GRADIENT = "gradient"


class ArenaConfig(BaseModel):
    """Device capacity, directional link bandwidths and compute rates (virtual units)."""

    model_config = {"extra": "forbid"}

    capacity_bytes: int = Field(default=1_000_000, ge=0, description="Capacidad del dispositivo")
    h2d_bandwidth: float = Field(default=1360.0, gt=0, description="Bytes por segundo virtual hacia el dispositivo")
    d2h_bandwidth: float = Field(default=680.0, gt=0, description="Bytes por segundo virtual hacia el host")
    per_call_latency: float = Field(default=0.0, ge=0, description="Segundos virtuales por llamada de transferencia")
    device_compute_rate: float = Field(default=2048.0, gt=0, description="FLOPs por segundo virtual en el dispositivo")
    host_compute_rate: float = Field(default=40.96, gt=0, description="FLOPs por segundo virtual en el host")


@dataclass(frozen=True)
class MemoryFootprint:
    weight_bytes: int = 0
    activation_bytes: int = 0
    gradient_bytes: int = 0

    @property
    def total(self) -> int:
        return self.weight_bytes + self.activation_bytes + self.gradient_bytes


@dataclass(frozen=True)
class _Allocation:
    nbytes: int
    kind: MemoryKind
    label: str


class DeviceArena:
    def __init__(self, config: ArenaConfig):
        self.config = config
        self.ledger: dict[int, _Allocation] = {}
        self.resident_bytes = 0
        self.peak_bytes = 0
        self._by_kind = {kind: 0 for kind in MemoryKind}
        self._handles = itertools.count(1)
        self._journal: list[tuple[str, int, int]] = []

    @property
    def capacity_bytes(self) -> int:
        return self.config.capacity_bytes

    def can_admit(self, nbytes: int) -> bool:
        return self.resident_bytes + nbytes <= self.capacity_bytes

    def alloc(self, nbytes: int, kind: MemoryKind = MemoryKind.WEIGHT, label: str = "") -> int:
        if nbytes < 0:
            raise ValueError(f"allocation size must be >= 0, got {nbytes}")
        if not self.can_admit(nbytes):
            raise InsufficientCapacity(nbytes, self.resident_bytes, self.capacity_bytes)
        handle = next(self._handles)
        self.ledger[handle] = _Allocation(nbytes, kind, label)
        self.resident_bytes += nbytes
        self._by_kind[kind] += nbytes
        self.peak_bytes = max(self.peak_bytes, self.resident_bytes)
        self._journal.append(("alloc", handle, nbytes))
        logger.debug(f"alloc #{handle} {nbytes} B [{kind.value}] {label} -> {self.resident_bytes} B")
        return handle

    def free(self, handle: int) -> None:
        allocation = self.ledger.pop(handle, None)
        if allocation is None:
            raise ArenaUsageError(f"free of unknown or already released handle {handle}")
        self.resident_bytes -= allocation.nbytes
        self._by_kind[allocation.kind] -= allocation.nbytes
        self._journal.append(("free", handle, allocation.nbytes))
        logger.debug(f"free #{handle} {allocation.nbytes} B -> {self.resident_bytes} B")

    def footprint(self) -> MemoryFootprint:
        return MemoryFootprint(
            weight_bytes=self._by_kind[MemoryKind.WEIGHT],
            activation_bytes=self._by_kind[MemoryKind.ACTIVATION],
            gradient_bytes=self._by_kind[MemoryKind.GRADIENT],
        )

    def audit(self) -> bool:
        """Replay the journal: the running sum must match the ledger and never pass capacity."""
        running = 0
        live: dict[int, int] = {}
        for op, handle, nbytes in self._journal:
            if op == "alloc":
                live[handle] = nbytes
                running += nbytes
                if running > self.capacity_bytes:
                    return False
            else:
                if live.pop(handle, None) != nbytes:
                    return False
                running -= nbytes
        ledger_sum = sum(allocation.nbytes for allocation in self.ledger.values())
        return running == self.resident_bytes == ledger_sum and set(live) == set(self.ledger)
