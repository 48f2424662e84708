"""
Pipeline execution engine.

Numeric work runs eagerly in stream order on the host, so outputs never depend
on the strategy; the strategy only changes virtual time and the device
footprint. One engine instance drives one run and shares nothing with other
instances.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from src.device_arena import (
    ArenaConfig,
    DeviceArena,
    Direction,
    Event,
    EventKind,
    InsufficientCapacity,
    MemoryKind,
    OOMDeadlockError,
    TransferChannel,
    TransferMode,
    TransferRequest,
    VirtualClock,
    run_to_quiescence,
)
from src.exec_engine.fidelity import output_digest, train_digest
from src.exec_engine.workload import TrainConfig, WorkloadConfig, WorkloadMode
from src.metrics_trace import (
    PROLOGUE,
    RunSummary,
    Trace,
    TraceKind,
    compute_detail,
    layers_detail,
    summarize,
)
from src.model_core import LayeredModel, Tensor, layer_backward, layer_forward, mse_loss, sgd_update
from src.model_core.blocks import FLOAT_BYTES
from src.scheduler import (
    Action,
    BeginCompute,
    IssueD2H,
    IssueH2D,
    Phase,
    PipelineState,
    Placement,
    StrategyConfig,
    StrategyKind,
    StreamStep,
    inference_steps,
    policy_step,
    residency_limit,
    training_stream,
)

logger = logging.getLogger(__name__)

AWAITING_H2D = "awaiting-h2d"
AWAITING_ACTIVATION = "awaiting-activation"
AWAITING_MEMORY = "awaiting-memory"


@dataclass
class _Call:
    direction: Direction
    layers: tuple[int, ...]
    start: float
    activation_layers: tuple[int, ...] = ()


class InferenceRun(NamedTuple):
    outputs: list[Tensor]
    trace: Trace
    summary: RunSummary


class TrainStepRun(NamedTuple):
    loss: float
    model: LayeredModel
    trace: Trace
    summary: RunSummary


class PipelineEngine:
    """
    Event loop shared by inference and training.

    Subclasses provide the stream, the numeric work and the flop count of each
    step, plus any device buffers a compute step needs.
    """

    def __init__(
        self,
        model: LayeredModel,
        strategy: StrategyConfig,
        arena_config: ArenaConfig,
        stream: Sequence[StreamStep],
        batch_size: int,
    ):
        self.model = model
        self.strategy = strategy.validate_for(model.n_layers)
        self.config = arena_config
        self.stream = tuple(stream)
        self.batch_size = batch_size
        self.activation_bytes = batch_size * model.d * FLOAT_BYTES

        self.on_device = strategy.kind is not StrategyKind.CPU_ONLY
        self.rate = arena_config.device_compute_rate if self.on_device else arena_config.host_compute_rate
        self.limit = residency_limit(strategy, model.n_layers)
        self.mode = strategy.transfer_mode

        self.arena = DeviceArena(arena_config)
        self.clock = VirtualClock()
        self.h2d = TransferChannel(Direction.HOST_TO_DEVICE, arena_config)
        self.d2h = TransferChannel(Direction.DEVICE_TO_HOST, arena_config)
        self.trace = Trace()

        self.residency = [Placement.HOST] * model.n_layers
        self.weight_handles: dict[int, int] = {}
        self.activation_handles: dict[int, int] = {}
        self.gradient_handles: dict[int, int] = {}
        self.activations_on_host: set[int] = set()
        self.activations_in_flight: set[int] = set()
        self.checkpointing = False

        self.h2d_queue: deque[list[int]] = deque()
        self.queued: set[int] = set()
        self.h2d_in_flight = 0
        self.d2h_in_flight = 0

        self.next_compute = 0
        self.computing = False
        self.completed = 0
        self.scheduled_upto = 0
        self.evicted_upto = 0

        self._prologue_pending: Optional[set[int]] = None
        self._prologue_done = not self.on_device
        self._idle_since = 0.0
        self._idle_reason: Optional[str] = None
        self._memory_blocked = False

    # -- hooks -------------------------------------------------------------

    def _flops(self, step: StreamStep) -> float:
        raise NotImplementedError

    def _execute(self, step: StreamStep) -> None:
        raise NotImplementedError

    def _compute_needs(self, step: StreamStep) -> list[tuple[MemoryKind, int]]:
        return []

    def _after_compute(self, step: StreamStep) -> None:
        pass

    def _prepare(self) -> None:
        pass

    def _finalize(self) -> None:
        pass

    # -- loop --------------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self.completed >= len(self.stream)

    def state(self) -> PipelineState:
        return PipelineState(
            stream=self.stream,
            residency=tuple(self.residency),
            queued_h2d=frozenset(self.queued),
            next_compute=self.next_compute,
            computing=self.computing,
            completed=self.completed,
            scheduled_upto=self.scheduled_upto,
            evicted_upto=self.evicted_upto,
            h2d_busy=bool(self.h2d_queue) or self.h2d_in_flight > 0,
            d2h_busy=self.d2h_in_flight > 0,
        )

    def run(self) -> float:
        """Drive the stream to completion and return the virtual makespan."""
        self._prepare()
        self._pump()
        try:
            end = run_to_quiescence(self.clock, self._handle, self._has_pending_work)
        except OOMDeadlockError as exc:
            raise OOMDeadlockError(f"{self.strategy.label}: {self._deadlock_detail()}") from exc
        self._finalize()
        logger.debug(f"{self.strategy.label}: stream of {len(self.stream)} steps done at t={end:g}")
        return end

    def _has_pending_work(self) -> bool:
        return not self.finished or bool(self.h2d_queue)

    def _deadlock_detail(self) -> str:
        position = min(self.next_compute, len(self.stream) - 1)
        layer = self.stream[position].layer
        return (
            f"stuck at t={self.clock.now:g} before position {position} (layer {layer}, "
            f"{self.residency[layer].value}); {self.arena.resident_bytes} B resident of "
            f"{self.arena.capacity_bytes} B, {len(self.h2d_queue)} fetch group(s) waiting"
        )

    def _handle(self, event: Event) -> None:
        if event.kind is EventKind.D2H_COMPLETE:
            self._finish_d2h(event.payload)
        elif event.kind is EventKind.H2D_COMPLETE:
            self._finish_h2d(event.payload)
        else:
            self._finish_compute(event.payload)
        self._pump()

    def _pump(self) -> None:
        while True:
            changed = False
            for action in policy_step(self.strategy, self.state()):
                changed = self._apply(action) or changed
            changed = self._start_fetches() or changed
            if not changed:
                break
        if not self.computing and not self.finished and self._idle_reason is None:
            self._idle_reason = self._diagnose()

    def _apply(self, action: Action) -> bool:
        if isinstance(action, IssueD2H):
            self._issue_d2h(action)
            return True
        if isinstance(action, IssueH2D):
            self._issue_h2d(action)
            return True
        if isinstance(action, BeginCompute):
            return self._begin_compute(action.position)
        return False

    def _diagnose(self) -> str:
        if not self._prologue_done:
            return PROLOGUE
        step = self.stream[self.next_compute]
        if step.phase is Phase.BACKWARD and (
            step.layer in self.activations_on_host or step.layer in self.activations_in_flight
        ):
            return AWAITING_ACTIVATION
        if self.residency[step.layer] is not Placement.DEVICE:
            return AWAITING_H2D
        if self._memory_blocked:
            return AWAITING_MEMORY
        return AWAITING_H2D

    # -- transfers ---------------------------------------------------------

    def _issue_h2d(self, action: IssueH2D) -> None:
        self.scheduled_upto = max(self.scheduled_upto, action.schedule_through)
        if self._prologue_pending is None:
            self._prologue_pending = set(action.layers)
            self._prologue_done = not action.layers
        if action.layers:
            self.h2d_queue.append(list(action.layers))
            self.queued.update(action.layers)

    def _start_fetches(self) -> bool:
        """Start the head fetch call if the channel, window and arena all allow it."""
        now = self.clock.now
        if not self.h2d_queue or not self.h2d.is_idle(now):
            return False
        group = self.h2d_queue[0]
        if self.mode is TransferMode.SEQUENTIAL:
            layers = (group[0],)
        else:
            # layers still draining to host join a later call of the same group
            layers = tuple(layer for layer in group if self.residency[layer] is Placement.HOST)
        if not layers or any(self.residency[layer] is not Placement.HOST for layer in layers):
            return False
        outside_host = sum(1 for placement in self.residency if placement is not Placement.HOST)
        if outside_host + len(layers) > self.limit:
            return False

        reloads = tuple(layer for layer in layers if layer in self.activations_on_host)
        sizes = [
            self.model.layer_bytes[layer] + (self.activation_bytes if layer in reloads else 0)
            for layer in layers
        ]
        if not self.arena.can_admit(sum(sizes)):
            return False

        for layer in layers:
            self.weight_handles[layer] = self.arena.alloc(
                self.model.layer_bytes[layer], MemoryKind.WEIGHT, f"weight:{layer}"
            )
            if layer in reloads:
                self.activation_handles[layer] = self.arena.alloc(
                    self.activation_bytes, MemoryKind.ACTIVATION, f"activation:{layer}"
                )
                self.activations_on_host.discard(layer)
                self.activations_in_flight.add(layer)
            self.residency[layer] = Placement.IN_FLIGHT_TO_DEVICE
            self.queued.discard(layer)
            group.remove(layer)
        if not group:
            self.h2d_queue.popleft()

        call = _Call(Direction.HOST_TO_DEVICE, layers, now, reloads)
        request = TransferRequest(Direction.HOST_TO_DEVICE, layers, self.mode, now)
        event = self.clock.schedule(self.h2d.enqueue(request, sizes, payload=call))
        self.h2d_in_flight += 1
        self.trace.record(
            now, event.time, TraceKind.H2D, layers_detail(layers, reloads), self.arena.footprint()
        )
        return True

    def _finish_h2d(self, call: _Call) -> None:
        self.h2d_in_flight -= 1
        for layer in call.layers:
            self.residency[layer] = Placement.DEVICE
            self.activations_in_flight.discard(layer)
        if self._prologue_pending is not None and not self._prologue_done:
            self._prologue_pending.difference_update(call.layers)
            self._prologue_done = not self._prologue_pending

    def _issue_d2h(self, action: IssueD2H) -> None:
        self.evicted_upto = max(self.evicted_upto, action.evict_through)
        if not action.layers:
            return
        for layer in action.layers:
            self.residency[layer] = Placement.IN_FLIGHT_TO_HOST
        carried = tuple(
            layer for layer in action.layers if self.checkpointing and layer in self.activation_handles
        )
        if self.mode is TransferMode.SEQUENTIAL:
            calls = [(layer,) for layer in action.layers]
        else:
            calls = [action.layers]
        for layers in calls:
            start = max(self.clock.now, self.d2h.busy_until)
            sizes = [
                self.model.layer_bytes[layer] + (self.activation_bytes if layer in carried else 0)
                for layer in layers
            ]
            call = _Call(
                Direction.DEVICE_TO_HOST,
                layers,
                start,
                tuple(layer for layer in layers if layer in carried),
            )
            request = TransferRequest(Direction.DEVICE_TO_HOST, layers, self.mode, self.clock.now)
            self.clock.schedule(self.d2h.enqueue(request, sizes, payload=call))
            self.d2h_in_flight += 1

    def _finish_d2h(self, call: _Call) -> None:
        self.d2h_in_flight -= 1
        for layer in call.layers:
            self.arena.free(self.weight_handles.pop(layer))
            if layer in call.activation_layers:
                self.arena.free(self.activation_handles.pop(layer))
                self.activations_on_host.add(layer)
            if layer in self.gradient_handles:
                self.arena.free(self.gradient_handles.pop(layer))
            self.residency[layer] = Placement.HOST
        self.trace.record(
            call.start,
            self.clock.now,
            TraceKind.D2H,
            layers_detail(call.layers, call.activation_layers),
            self.arena.footprint(),
        )

    # -- compute -----------------------------------------------------------

    def _reserve_compute(self, step: StreamStep) -> bool:
        if not self.on_device:
            return True
        needs = self._compute_needs(step)
        if not self.arena.can_admit(sum(nbytes for _, nbytes in needs)):
            return False
        for kind, nbytes in needs:
            handle = self.arena.alloc(nbytes, kind, f"{kind.value}:{step.layer}")
            if kind is MemoryKind.GRADIENT:
                self.gradient_handles[step.layer] = handle
            else:
                self.activation_handles[step.layer] = handle
        return True

    def _begin_compute(self, position: int) -> bool:
        step = self.stream[position]
        if self.on_device and self.residency[step.layer] is not Placement.DEVICE:
            raise RuntimeError(f"compute scheduled on layer {step.layer} while {self.residency[step.layer].value}")
        before = self.arena.footprint()
        if not self._reserve_compute(step):
            self._memory_blocked = True
            return False
        self._memory_blocked = False

        now = self.clock.now
        if now > self._idle_since:
            self.trace.record(self._idle_since, now, TraceKind.STALL, self._idle_reason or AWAITING_H2D, before)
        self._idle_reason = None

        self._execute(step)
        end = now + self._flops(step) / self.rate
        self.computing = True
        self.next_compute = position + 1
        self.clock.schedule(Event(end, EventKind.COMPUTE_COMPLETE, step))
        self.trace.record(now, end, TraceKind.COMPUTE, compute_detail(step), self.arena.footprint())
        return True

    def _finish_compute(self, step: StreamStep) -> None:
        self._after_compute(step)
        self.computing = False
        self.completed += 1
        self._idle_since = self.clock.now

    def summary(self, n_items: int, digest: str) -> RunSummary:
        return summarize(self.trace, n_items, strategy=self.strategy.label, output_digest=digest)


class InferenceEngine(PipelineEngine):
    """Repeated forward passes, one per input, through a single workspace activation."""

    def __init__(self, model, inputs: Sequence[Tensor], strategy, arena_config):
        self.inputs = [_check_batch(model, x, "input") for x in inputs]
        if not self.inputs:
            raise ValueError("run_inference needs at least one input")
        batch = self.inputs[0].shape[0]
        if any(x.shape[0] != batch for x in self.inputs):
            raise ValueError("all inputs must share the same batch size")
        super().__init__(model, strategy, arena_config, inference_steps(model.n_layers, len(self.inputs)), batch)
        self.values = list(self.inputs)

    def _prepare(self) -> None:
        if not self.on_device:
            return
        try:
            self.arena.alloc(self.activation_bytes, MemoryKind.ACTIVATION, "workspace")
        except InsufficientCapacity as exc:
            raise OOMDeadlockError(f"{self.strategy.label}: workspace activation does not fit ({exc})") from exc

    def _flops(self, step: StreamStep) -> float:
        return 2.0 * self.batch_size * self.model.d * self.model.d

    def _execute(self, step: StreamStep) -> None:
        block = self.model.blocks[step.layer]
        self.values[step.item] = layer_forward(block, self.values[step.item])


class TrainingEngine(PipelineEngine):
    """One SGD step: windowed forward, loss, windowed backward with eager updates."""

    def __init__(self, model, x: Tensor, target: Tensor, strategy, arena_config, train_config: TrainConfig):
        x = _check_batch(model, x, "x")
        target = _check_batch(model, target, "target")
        if target.shape != x.shape:
            raise ValueError(f"target shape {list(target.shape)} does not match x shape {list(x.shape)}")
        if x.shape[0] != train_config.batch_size:
            raise ValueError(f"x has {x.shape[0]} rows but train config batch_size is {train_config.batch_size}")
        super().__init__(model, strategy, arena_config, training_stream(model.n_layers), x.shape[0])
        self.train_config = train_config
        self.checkpointing = train_config.checkpointing
        self.target = target
        self.blocks = list(model.blocks)
        self.layer_inputs: dict[int, Tensor] = {}
        self.current = x
        self.grad: Optional[Tensor] = None
        self.loss: Optional[float] = None

    def _flops(self, step: StreamStep) -> float:
        forward = 2.0 * self.batch_size * self.model.d * self.model.d
        if step.phase is Phase.BACKWARD and not self.blocks[step.layer].frozen:
            return 2.0 * forward
        return forward

    def _compute_needs(self, step: StreamStep) -> list[tuple[MemoryKind, int]]:
        if step.phase is Phase.FORWARD:
            return [(MemoryKind.ACTIVATION, self.activation_bytes)]
        if self.blocks[step.layer].frozen:
            return []
        return [(MemoryKind.GRADIENT, self.model.layer_bytes[step.layer])]

    def _execute(self, step: StreamStep) -> None:
        block = self.blocks[step.layer]
        if step.phase is Phase.FORWARD:
            self.layer_inputs[step.layer] = self.current
            self.current = layer_forward(block, self.current)
            return
        if self.grad is None:
            self.loss, self.grad = mse_loss(self.current, self.target)
        dx, dw, db = layer_backward(block, self.layer_inputs[step.layer], self.grad)
        if not block.frozen:
            self.blocks[step.layer] = sgd_update(block, dw, db, self.train_config.lr)
        self.grad = dx

    def _after_compute(self, step: StreamStep) -> None:
        if step.phase is Phase.BACKWARD and self.on_device:
            handle = self.activation_handles.pop(step.layer, None)
            if handle is not None:
                self.arena.free(handle)

    def _finalize(self) -> None:
        for layer in list(self.gradient_handles):
            self.arena.free(self.gradient_handles.pop(layer))

    @property
    def updated_model(self) -> LayeredModel:
        return self.model.replace_blocks(self.blocks)


def _check_batch(model: LayeredModel, x: Tensor, name: str) -> Tensor:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != model.d or x.shape[0] < 1:
        raise ValueError(f"{name} must have shape [b, {model.d}], got {list(x.shape)}")
    return x


def run_inference(
    model: LayeredModel,
    inputs: Sequence[Tensor],
    strategy: StrategyConfig,
    arena_config: ArenaConfig,
) -> InferenceRun:
    """
    Run every input through the model under ``strategy``.

    Raises:
        StrategyConfigError: the window does not fit the model.
        OOMDeadlockError: the arena cannot hold the minimal working set.
    """
    engine = InferenceEngine(model, inputs, strategy, arena_config)
    engine.run()
    outputs = engine.values
    summary = engine.summary(len(outputs), output_digest(outputs))
    logger.info(
        f"{strategy.label}: per_item_time={summary.per_item_time:g} peak={summary.peak_bytes} B "
        f"stall={summary.total_stall_time:g}"
    )
    return InferenceRun(outputs, engine.trace, summary)


def run_train_step(
    model: LayeredModel,
    x: Tensor,
    target: Tensor,
    strategy: StrategyConfig,
    arena_config: ArenaConfig,
    train_config: TrainConfig,
) -> TrainStepRun:
    engine = TrainingEngine(model, x, target, strategy, arena_config, train_config)
    engine.run()
    updated = engine.updated_model
    summary = engine.summary(1, train_digest(engine.loss, updated))
    logger.info(
        f"{strategy.label}: train step loss={engine.loss:.6g} peak={summary.peak_bytes} B "
        f"makespan={summary.makespan:g}"
    )
    return TrainStepRun(engine.loss, updated, engine.trace, summary)


def run_workload(
    model: LayeredModel,
    strategy: StrategyConfig,
    arena_config: ArenaConfig,
    workload: WorkloadConfig,
) -> InferenceRun | TrainStepRun:
    """Generate the workload's deterministic inputs and run it under ``strategy``."""
    if workload.mode is WorkloadMode.TRAIN:
        x, target = workload.make_batch(model.seed, model.d)
        return run_train_step(model, x, target, strategy, arena_config, workload.train_config)
    return run_inference(model, workload.make_inputs(model.seed, model.d), strategy, arena_config)
