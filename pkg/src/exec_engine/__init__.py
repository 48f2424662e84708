from src.device_arena.arena import MemoryFootprint
from src.exec_engine.engine import (
    InferenceEngine,
    InferenceRun,
    PipelineEngine,
    TrainingEngine,
    TrainStepRun,
    run_inference,
    run_train_step,
    run_workload,
)
from src.exec_engine.fidelity import (
    FidelityReport,
    bitwise_equal,
    output_digest,
    train_digest,
    verify_fidelity,
)
from src.exec_engine.workload import TrainConfig, WorkloadConfig, WorkloadMode

__all__ = [
    "FidelityReport",
    "InferenceEngine",
    "InferenceRun",
    "MemoryFootprint",
    "PipelineEngine",
    "TrainConfig",
    "TrainStepRun",
    "TrainingEngine",
    "WorkloadConfig",
    "WorkloadMode",
    "bitwise_equal",
    "output_digest",
    "run_inference",
    "run_train_step",
    "run_workload",
    "train_digest",
    "verify_fidelity",
]
