"""
Run summaries aggregated from a trace.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from src.metrics_trace.trace import PROLOGUE, Trace, TraceError, TraceKind


class RunSummary(BaseModel):
    """Per-run metrics in virtual seconds and device bytes."""

    strategy: str = Field(default="", description="Etiqueta de la estrategia")
    n_items: int = Field(ge=1)
    peak_bytes: int = Field(ge=0)
    peak_weight_bytes: int = Field(default=0, ge=0)
    peak_activation_bytes: int = Field(default=0, ge=0)
    peak_gradient_bytes: int = Field(default=0, ge=0)
    per_item_time: float = Field(gt=0)
    makespan: float = Field(ge=0)
    total_stall_time: float = Field(default=0.0, ge=0)
    first_compute_start: float = 0.0
    last_compute_end: float = 0.0
    n_transfers_h2d: int = 0
    n_transfers_d2h: int = 0
    output_digest: str = ""


def summarize(trace: Trace, n_items: int, strategy: str = "", output_digest: str = "") -> RunSummary:
    """
    Aggregate ``trace``.

    per_item_time spans first compute start to last compute end, less any
    prologue wait inside that span, divided by ``n_items``; makespan is the
    latest event end. Stalls tagged ``prologue`` do not count towards
    total_stall_time.
    """
    if len(trace) == 0:
        raise TraceError("cannot summarize an empty trace")
    if n_items < 1:
        raise ValueError(f"n_items must be >= 1, got {n_items}")

    computes = trace.of_kind(TraceKind.COMPUTE)
    if not computes:
        raise TraceError("trace has no compute events")

    first_start = min(event.t_start for event in computes)
    last_end = max(event.t_end for event in computes)
    stalls = trace.of_kind(TraceKind.STALL)
    stall_time = sum(event.duration for event in stalls if event.detail != PROLOGUE)
    # sequential prologue loads overlap the first computes
    prologue_inside = sum(
        max(0.0, min(event.t_end, last_end) - max(event.t_start, first_start))
        for event in stalls
        if event.detail == PROLOGUE
    )

    return RunSummary(
        strategy=strategy,
        n_items=n_items,
        peak_bytes=max(event.resident_bytes for event in trace),
        peak_weight_bytes=max(event.weight_bytes for event in trace),
        peak_activation_bytes=max(event.activation_bytes for event in trace),
        peak_gradient_bytes=max(event.gradient_bytes for event in trace),
        per_item_time=(last_end - first_start - prologue_inside) / n_items,
        makespan=max(event.t_end for event in trace),
        total_stall_time=stall_time,
        first_compute_start=first_start,
        last_compute_end=last_end,
        n_transfers_h2d=len(trace.of_kind(TraceKind.H2D)),
        n_transfers_d2h=len(trace.of_kind(TraceKind.D2H)),
        output_digest=output_digest,
    )
