"""
Exhaustive (k, k') search under a device-memory budget.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Optional

import pandas as pd
from pydantic import BaseModel, Field, model_validator

from config.settings import get_settings
from src.device_arena import ArenaConfig, OOMDeadlockError
from src.exec_engine import WorkloadConfig, WorkloadMode, run_workload
from src.model_core import LayeredModel, ModelConfig
from src.scheduler import StrategyConfig, TransferMode, peak_weight_residency

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["K", "K'", "Feasible", "PeakBytes", "PerItemTime", "Reason"]


class Objective(str, Enum):
    MIN_PER_ITEM_TIME = "min_per_item_time"
    MIN_PEAK_BYTES = "min_peak_bytes"
    MIN_TIME_UNDER_BUDGET = "min_time_under_budget"


class SweepSpec(BaseModel):
    """Inclusive ``k`` and ``k'`` ranges, the byte budget and what to optimise."""

    model_config = {"extra": "forbid"}

    k_range: tuple[int, int] = Field(description="Rango inclusivo de k")
    k_prime_range: tuple[int, int] = Field(description="Rango inclusivo de k'")
    budget_bytes: int = Field(gt=0)
    objective: Objective = Objective.MIN_PER_ITEM_TIME
    transfer_mode: TransferMode = TransferMode.BATCH

    @model_validator(mode="after")
    def _check_ranges(self) -> "SweepSpec":
        for name, (low, high) in (("k_range", self.k_range), ("k_prime_range", self.k_prime_range)):
            if low < 1 or high < low:
                raise ValueError(f"{name} must be a non-empty range of positive integers, got [{low}, {high}]")
        return self

    def pairs(self, n_layers: int) -> list[tuple[int, int]]:
        """Every ``(k, k')`` with ``k' < k <= n_layers`` inside both ranges, k-major."""
        k_low, k_high = self.k_range
        kp_low, kp_high = self.k_prime_range
        return [
            (k, k_prime)
            for k in range(k_low, min(k_high, n_layers) + 1)
            for k_prime in range(kp_low, kp_high + 1)
            if k_prime < k
        ]


class SweepRow(BaseModel):
    k: int
    k_prime: int
    feasible: bool
    peak_bytes: Optional[int] = None
    per_item_time: Optional[float] = None
    reason: str = ""


class SweepResult(BaseModel):
    table: list[SweepRow]
    best: Optional[tuple[int, int]] = None
    objective: Objective = Objective.MIN_PER_ITEM_TIME

    def row(self, k: int, k_prime: int) -> SweepRow:
        for row in self.table:
            if (row.k, row.k_prime) == (k, k_prime):
                return row
        raise KeyError(f"({k}, {k_prime}) was not evaluated")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                [row.k, row.k_prime, row.feasible, row.peak_bytes, row.per_item_time, row.reason]
                for row in self.table
            ],
            columns=SWEEP_COLUMNS,
        )


def activation_bound(workload: WorkloadConfig, n_layers: int, d: int) -> int:
    """Activation bytes any on-device run of ``workload`` must hold at once."""
    per_tensor = workload.activation_bytes(d)
    if workload.mode is WorkloadMode.TRAIN and not workload.checkpointing:
        return n_layers * per_tensor
    return per_tensor


def objective_key(objective: Objective, row: SweepRow) -> tuple:
    if objective is Objective.MIN_PEAK_BYTES:
        return (row.peak_bytes, row.k, row.k_prime)
    return (row.per_item_time, row.peak_bytes, row.k, row.k_prime)


def _evaluate(
    model: LayeredModel,
    arena: ArenaConfig,
    workload: WorkloadConfig,
    spec: SweepSpec,
    pair: tuple[int, int],
) -> SweepRow:
    k, k_prime = pair
    strategy = StrategyConfig.superpipeline(k, k_prime, spec.transfer_mode)
    if spec.objective is not Objective.MIN_TIME_UNDER_BUDGET:
        bound = peak_weight_residency(strategy, model.n_layers, model.layer_bytes[0]) + activation_bound(
            workload, model.n_layers, model.d
        )
        if bound > spec.budget_bytes:
            return SweepRow(k=k, k_prime=k_prime, feasible=False, reason="budget")

    try:
        summary = run_workload(model, strategy, arena, workload).summary
    except OOMDeadlockError:
        logger.warning(f"{strategy.label}: OOM-deadlock under {spec.budget_bytes} B")
        return SweepRow(k=k, k_prime=k_prime, feasible=False, reason="oom")

    feasible = summary.peak_bytes <= spec.budget_bytes
    return SweepRow(
        k=k,
        k_prime=k_prime,
        feasible=feasible,
        peak_bytes=summary.peak_bytes,
        per_item_time=summary.per_item_time,
        reason="" if feasible else "budget",
    )


def grid_search(
    model_cfg: ModelConfig,
    arena_cfg: ArenaConfig,
    workload: WorkloadConfig,
    spec: SweepSpec,
    workers: Optional[int] = None,
) -> SweepResult:
    """
    Evaluate every Superpipeline pair of ``spec`` with the arena capped at the budget.

    Rows come back in k-major grid order whatever the worker count. ``best``
    is ``None`` when no pair is feasible.
    """
    model = model_cfg.build()
    arena = arena_cfg.model_copy(update={"capacity_bytes": spec.budget_bytes})
    pairs = spec.pairs(model.n_layers)
    workers = workers or get_settings().sweep_workers

    with ThreadPoolExecutor(max_workers=workers) as pool:
        table = list(pool.map(lambda pair: _evaluate(model, arena, workload, spec, pair), pairs))

    feasible = [row for row in table if row.feasible]
    best = None
    if feasible:
        winner = min(feasible, key=lambda row: objective_key(spec.objective, row))
        best = (winner.k, winner.k_prime)

    logger.info(
        f"sweep of {len(pairs)} pairs, {len(feasible)} feasible, best={best} ({spec.objective.value})"
    )
    return SweepResult(table=table, best=best, objective=spec.objective)
