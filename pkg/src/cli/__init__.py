from src.cli.app import EXIT_CONFIG, EXIT_FIDELITY, EXIT_OK, EXIT_OOM, app
from src.cli.experiment import ExperimentConfig, OutputConfig, SweepSection

__all__ = [
    "EXIT_CONFIG",
    "EXIT_FIDELITY",
    "EXIT_OK",
    "EXIT_OOM",
    "ExperimentConfig",
    "OutputConfig",
    "SweepSection",
    "app",
]
