from src.device_arena.transfer import TransferMode
from src.scheduler.policy import (
    Action,
    BeginCompute,
    IssueD2H,
    IssueH2D,
    Phase,
    PipelineState,
    Placement,
    StreamStep,
    Wait,
    execution_stream,
    inference_steps,
    peak_weight_residency,
    policy_step,
    residency_limit,
    training_stream,
)
from src.scheduler.strategy import StrategyConfig, StrategyConfigError, StrategyKind

__all__ = [
    "Action",
    "BeginCompute",
    "IssueD2H",
    "IssueH2D",
    "Phase",
    "PipelineState",
    "Placement",
    "StrategyConfig",
    "StrategyConfigError",
    "StrategyKind",
    "StreamStep",
    "TransferMode",
    "Wait",
    "execution_stream",
    "inference_steps",
    "peak_weight_residency",
    "policy_step",
    "residency_limit",
    "training_stream",
]
