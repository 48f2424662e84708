"""
Online residency policy.

``policy_step`` is a pure function of the strategy and a ``PipelineState``
snapshot. It decides which stream positions get fetched or evicted and whether
compute may start; the execution engine turns the returned actions into
arena allocations and channel events.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from src.scheduler.strategy import StrategyConfig, StrategyKind


class Placement(str, Enum):
    HOST = "host"
    IN_FLIGHT_TO_DEVICE = "to_device"
    DEVICE = "device"
    IN_FLIGHT_TO_HOST = "to_host"


class Phase(str, Enum):
    FORWARD = "fwd"
    BACKWARD = "bwd"


@dataclass(frozen=True)
class StreamStep:
    position: int
    item: int
    layer: int
    phase: Phase = Phase.FORWARD


def execution_stream(n_layers: int, n_items: int) -> list[tuple[int, int]]:
    """Item-major ``(item, layer)`` pairs for repeated forward passes."""
    if n_layers < 1 or n_items < 1:
        raise ValueError(f"n_layers and n_items must be >= 1, got {n_layers}, {n_items}")
    return [(item, layer) for item in range(n_items) for layer in range(n_layers)]


def inference_steps(n_layers: int, n_items: int) -> tuple[StreamStep, ...]:
    return tuple(
        StreamStep(position, item, layer)
        for position, (item, layer) in enumerate(execution_stream(n_layers, n_items))
    )


def training_stream(n_layers: int) -> tuple[StreamStep, ...]:
    """Forward over layers ``0..n-1`` then backward over ``n-1..0``."""
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    forward = [StreamStep(layer, 0, layer, Phase.FORWARD) for layer in range(n_layers)]
    backward = [
        StreamStep(n_layers + offset, 0, layer, Phase.BACKWARD)
        for offset, layer in enumerate(reversed(range(n_layers)))
    ]
    return tuple(forward + backward)


@dataclass(frozen=True)
class PipelineState:
    """
    Snapshot handed to the policy.

    Positions ``[0, completed)`` have finished compute, ``[0, scheduled_upto)``
    have had their fetch decided and ``[0, evicted_upto)`` their eviction.
    """

    stream: tuple[StreamStep, ...]
    residency: tuple[Placement, ...]
    queued_h2d: frozenset[int] = frozenset()
    next_compute: int = 0
    computing: bool = False
    completed: int = 0
    scheduled_upto: int = 0
    evicted_upto: int = 0
    h2d_busy: bool = False
    d2h_busy: bool = False

    @property
    def stream_length(self) -> int:
        return len(self.stream)

    @property
    def computed_since_last_evict(self) -> int:
        return self.completed - self.evicted_upto

    @property
    def finished(self) -> bool:
        return self.completed >= len(self.stream)

    def layer_at(self, position: int) -> int:
        return self.stream[position].layer


@dataclass(frozen=True)
class IssueH2D:
    layers: tuple[int, ...]
    schedule_through: int


@dataclass(frozen=True)
class IssueD2H:
    layers: tuple[int, ...]
    evict_through: int


@dataclass(frozen=True)
class BeginCompute:
    position: int


@dataclass(frozen=True)
class Wait:
    reason: str = field(default="idle")


Action = Union[IssueH2D, IssueD2H, BeginCompute, Wait]


def residency_limit(cfg: StrategyConfig, n_layers: int) -> int:
    """Maximum number of layers outside host memory at any instant."""
    if cfg.kind is StrategyKind.STANDARD:
        return n_layers
    if cfg.kind is StrategyKind.CPU_ONLY:
        return 0
    if cfg.kind is StrategyKind.NAIVE:
        return min(cfg.k, n_layers)
    return min(cfg.k + cfg.k_prime, n_layers)


def peak_weight_residency(cfg: StrategyConfig, n_layers: int, weight_bytes_per_layer: int) -> int:
    return residency_limit(cfg, n_layers) * weight_bytes_per_layer


def _evictable(state: PipelineState, start: int, stop: int, needed_upto: int) -> tuple[int, ...]:
    """Layers of positions ``[start, stop)`` not needed by an uncomputed position before ``needed_upto``."""
    still_needed = {state.layer_at(p) for p in range(state.completed, needed_upto)}
    layers: list[int] = []
    for position in range(start, stop):
        layer = state.layer_at(position)
        if layer in still_needed or layer in layers:
            continue
        if state.residency[layer] is Placement.DEVICE:
            layers.append(layer)
    return tuple(layers)


def _fetchable(state: PipelineState, start: int, stop: int) -> tuple[int, ...]:
    """Layers of positions ``[start, stop)`` that need a new transfer."""
    layers: list[int] = []
    for position in range(start, stop):
        layer = state.layer_at(position)
        if layer in layers or layer in state.queued_h2d:
            continue
        if state.residency[layer] in (Placement.DEVICE, Placement.IN_FLIGHT_TO_DEVICE):
            continue
        layers.append(layer)
    return tuple(layers)


def _compute_ready(state: PipelineState) -> bool:
    return (
        not state.computing
        and not state.finished
        and state.next_compute < state.scheduled_upto
        and state.residency[state.layer_at(state.next_compute)] is Placement.DEVICE
    )


def _standard_step(state: PipelineState) -> list[Action]:
    actions: list[Action] = []
    if state.scheduled_upto == 0:
        n_layers = len(state.residency)
        prologue = _fetchable(state, 0, min(n_layers, state.stream_length))
        actions.append(IssueH2D(prologue, state.stream_length))
    elif _compute_ready(state):
        actions.append(BeginCompute(state.next_compute))
    return actions


def _naive_step(cfg: StrategyConfig, state: PipelineState) -> list[Action]:
    actions: list[Action] = []
    length = state.stream_length
    if state.scheduled_upto == 0:
        actions.append(IssueH2D(_fetchable(state, 0, min(cfg.k, length)), min(cfg.k, length)))
        return actions

    group_done = state.completed == state.scheduled_upto and not state.computing
    if group_done and state.evicted_upto < state.completed:
        leaving = _evictable(state, state.evicted_upto, state.completed, state.scheduled_upto)
        actions.append(IssueD2H(leaving, state.completed))
        return actions

    drained = state.evicted_upto == state.completed and not state.d2h_busy
    if group_done and drained and state.scheduled_upto < length:
        stop = min(state.scheduled_upto + cfg.k, length)
        actions.append(IssueH2D(_fetchable(state, state.scheduled_upto, stop), stop))
        return actions

    # strictly phased: the whole group must be resident before computing it
    if not state.h2d_busy and _compute_ready(state):
        actions.append(BeginCompute(state.next_compute))
    return actions


def _superpipeline_step(cfg: StrategyConfig, state: PipelineState) -> list[Action]:
    actions: list[Action] = []
    length = state.stream_length
    if state.scheduled_upto == 0:
        stop = min(cfg.k, length)
        actions.append(IssueH2D(_fetchable(state, 0, stop), stop))
        return actions

    at_end = state.finished and state.evicted_upto < length
    if state.computed_since_last_evict >= cfg.k_prime or at_end:
        evict_stop = min(state.evicted_upto + cfg.k_prime, state.completed)
        fetch_stop = min(state.scheduled_upto + cfg.k_prime, length)
        # a layer the prefetch wraps back to stays resident instead of making a round trip
        actions.append(IssueD2H(_evictable(state, state.evicted_upto, evict_stop, fetch_stop), evict_stop))
        if state.scheduled_upto < length:
            actions.append(IssueH2D(_fetchable(state, state.scheduled_upto, fetch_stop), fetch_stop))

    if _compute_ready(state):
        actions.append(BeginCompute(state.next_compute))
    return actions


def _cpu_step(state: PipelineState) -> list[Action]:
    if not state.computing and not state.finished:
        return [BeginCompute(state.next_compute)]
    return []


def policy_step(cfg: StrategyConfig, state: PipelineState) -> list[Action]:
    """
    Decide the next actions for ``state``.

    Returns ``[Wait()]`` when nothing can be issued right now. An ``IssueD2H``
    always precedes an ``IssueH2D`` emitted in the same step.
    """
    if cfg.kind is StrategyKind.STANDARD:
        actions = _standard_step(state)
    elif cfg.kind is StrategyKind.CPU_ONLY:
        actions = _cpu_step(state)
    elif cfg.kind is StrategyKind.NAIVE:
        actions = _naive_step(cfg, state)
    else:
        actions = _superpipeline_step(cfg, state)
    return actions or [Wait()]
