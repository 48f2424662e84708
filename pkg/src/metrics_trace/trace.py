"""
Event trace of one engine run.

Every event carries the device footprint observed right after it took effect:
transfers to the device snapshot at call start (bytes are reserved then),
compute at start (activation and gradient buffers are allocated then),
evictions at completion (bytes are released then) and stalls when they end.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence

import pandas as pd

from src.device_arena.arena import MemoryFootprint
from src.scheduler.policy import Phase, StreamStep

CSV_COLUMNS = [
    "t_start",
    "t_end",
    "kind",
    "detail",
    "resident_bytes",
    "weight_bytes",
    "activation_bytes",
    "gradient_bytes",
]

PROLOGUE = "prologue"


class TraceError(ValueError):
    """Empty or malformed trace."""


class TraceKind(str, Enum):
    COMPUTE = "compute"
    H2D = "h2d"
    D2H = "d2h"
    STALL = "stall"


def compute_detail(step: StreamStep) -> str:
    return f"{step.item}:{step.layer}:{step.phase.value}"


def parse_compute_detail(detail: str) -> tuple[int, int, Phase]:
    try:
        item, layer, phase = detail.split(":")
        return int(item), int(layer), Phase(phase)
    except ValueError as exc:
        raise TraceError(f"malformed compute detail '{detail}'") from exc


def layers_detail(layers: Sequence[int], with_activations: Sequence[int] = ()) -> str:
    """``"3;4+a"``: layer list, ``+a`` marks a layer travelling with its activation."""
    carried = set(with_activations)
    return ";".join(f"{layer}+a" if layer in carried else str(layer) for layer in layers)


@dataclass(frozen=True)
class TraceEvent:
    t_start: float
    t_end: float
    kind: TraceKind
    detail: str
    resident_bytes: int
    weight_bytes: int
    activation_bytes: int
    gradient_bytes: int

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def footprint(self) -> MemoryFootprint:
        return MemoryFootprint(self.weight_bytes, self.activation_bytes, self.gradient_bytes)

    def as_row(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_end": self.t_end,
            "kind": self.kind.value,
            "detail": self.detail,
            "resident_bytes": self.resident_bytes,
            "weight_bytes": self.weight_bytes,
            "activation_bytes": self.activation_bytes,
            "gradient_bytes": self.gradient_bytes,
        }


class Trace:
    """Append-only list of ``TraceEvent`` in recording order."""

    def __init__(self, events: Optional[Iterable[TraceEvent]] = None):
        self.events: list[TraceEvent] = list(events or [])

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Trace) and self.events == other.events

    def record(
        self,
        t_start: float,
        t_end: float,
        kind: TraceKind,
        detail: str,
        footprint: MemoryFootprint,
    ) -> TraceEvent:
        if not detail:
            raise TraceError(f"{kind.value} event without detail")
        event = TraceEvent(
            t_start=t_start,
            t_end=t_end,
            kind=kind,
            detail=detail,
            resident_bytes=footprint.total,
            weight_bytes=footprint.weight_bytes,
            activation_bytes=footprint.activation_bytes,
            gradient_bytes=footprint.gradient_bytes,
        )
        self.events.append(event)
        return event

    def of_kind(self, kind: TraceKind) -> list[TraceEvent]:
        return [event for event in self.events if event.kind is kind]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([event.as_row() for event in self.events], columns=CSV_COLUMNS)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "Trace":
        missing = [column for column in CSV_COLUMNS if column not in frame.columns]
        if missing:
            raise TraceError(f"trace is missing columns: {missing}")
        events = []
        for row in frame[CSV_COLUMNS].itertuples(index=False):
            try:
                kind = TraceKind(row.kind)
            except ValueError as exc:
                raise TraceError(f"unknown event kind '{row.kind}'") from exc
            events.append(
                TraceEvent(
                    t_start=float(row.t_start),
                    t_end=float(row.t_end),
                    kind=kind,
                    detail=str(row.detail),
                    resident_bytes=int(row.resident_bytes),
                    weight_bytes=int(row.weight_bytes),
                    activation_bytes=int(row.activation_bytes),
                    gradient_bytes=int(row.gradient_bytes),
                )
            )
        return cls(events)


def audit_trace(
    trace: Trace,
    capacity_bytes: int,
    stream: Optional[Sequence[StreamStep]] = None,
) -> list[str]:
    """
    Check a finished trace and return human-readable violations.

    An empty list means every event has a non-negative duration, a footprint
    whose parts add up to ``resident_bytes`` within capacity, and (when
    ``stream`` is given) compute events that cover the stream once each, in
    order.
    """
    violations: list[str] = []
    for index, event in enumerate(trace):
        if event.t_end < event.t_start:
            violations.append(f"event {index}: ends at {event.t_end} before it starts at {event.t_start}")
        if event.footprint.total != event.resident_bytes:
            violations.append(
                f"event {index}: components sum to {event.footprint.total}, "
                f"resident_bytes is {event.resident_bytes}"
            )
        if event.resident_bytes > capacity_bytes:
            violations.append(
                f"event {index}: {event.resident_bytes} B resident exceeds capacity {capacity_bytes} B"
            )

    if stream is not None:
        seen = [event.detail for event in trace.of_kind(TraceKind.COMPUTE)]
        expected = [compute_detail(step) for step in stream]
        if seen != expected:
            violations.append(
                f"compute events do not match the stream: {len(seen)} seen, {len(expected)} expected"
            )
    return violations
