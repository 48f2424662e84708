from src.tuner.capacity import max_feasible_batch
from src.tuner.grid import (
    SWEEP_COLUMNS,
    Objective,
    SweepResult,
    SweepRow,
    SweepSpec,
    activation_bound,
    grid_search,
    objective_key,
)

__all__ = [
    "SWEEP_COLUMNS",
    "Objective",
    "SweepResult",
    "SweepRow",
    "SweepSpec",
    "activation_bound",
    "grid_search",
    "max_feasible_batch",
    "objective_key",
]
