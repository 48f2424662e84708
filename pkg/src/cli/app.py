"""
Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 OOM-deadlock, 4 fidelity failure.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional

import pandas as pd
import typer

from config.settings import get_settings
from src.cli.experiment import ExperimentConfig
from src.device_arena import ARENA_PROFILES, OOMDeadlockError
from src.exec_engine import WorkloadMode, run_workload
from src.metrics_trace import RunSummary, export_summary, export_trace
from src.scheduler import StrategyConfig
from src.tuner import Objective, grid_search, max_feasible_batch
from src.utils import log_operation, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OOM = 3
EXIT_FIDELITY = 4

COMPARE_COLUMNS = ["Method", "PeakBytes", "PerItemTime", "K", "K'"]

app = typer.Typer(help="Simulador de offloading por ventanas de capas (k, k').", no_args_is_help=True)


@app.callback()
def main() -> None:
    settings = get_settings()
    setup_logging(
        settings.logs_dir,
        settings.log_level,
        json_format=settings.enable_structured_logging,
    )


def _fail(message: str, code: int) -> typer.Exit:
    typer.echo(f"error: {message}", err=True)
    return typer.Exit(code)


def _load(config: Optional[Path], overrides: List[str]) -> ExperimentConfig:
    path = config or get_settings().default_experiment
    try:
        return ExperimentConfig.from_yaml(path).with_overrides(overrides)
    except (ValueError, FileNotFoundError) as exc:
        raise _fail(str(exc), EXIT_CONFIG) from exc


def _parse_range(text: Optional[str], name: str) -> Optional[tuple[int, int]]:
    if text is None:
        return None
    low, sep, high = text.partition(":")
    try:
        return (int(low), int(high)) if sep else (int(low), int(low))
    except ValueError as exc:
        raise _fail(f"{name} must look like LOW:HIGH, got '{text}'", EXIT_CONFIG) from exc


def _one_line(summary: RunSummary) -> str:
    return (
        f"{summary.strategy} peak={summary.peak_bytes}B per_item={summary.per_item_time:.6g}s "
        f"stall={summary.total_stall_time:.6g}s digest={summary.output_digest[:16]}"
    )


def _execute(experiment: ExperimentConfig, out: Optional[Path]) -> None:
    model = experiment.model.build()
    try:
        run = run_workload(model, experiment.strategy, experiment.arena, experiment.workload)
    except OOMDeadlockError as exc:
        raise _fail(f"OOM-deadlock: {exc}", EXIT_OOM) from exc
    except ValueError as exc:
        raise _fail(str(exc), EXIT_CONFIG) from exc

    target = experiment.output_dir(out)
    if "csv" in experiment.output.formats:
        export_trace(run.trace, run.summary, target / "trace.csv", "csv")
    if "json" in experiment.output.formats:
        export_trace(run.trace, run.summary, target / "trace.json", "json")
    export_summary(run.summary, target / "summary.json")
    typer.echo(_one_line(run.summary))


@app.command()
@log_operation("run")
def run(
    config: Optional[Path] = typer.Argument(None, help="Archivo de experimento YAML"),
    set_: List[str] = typer.Option([], "--set", help="Override section.key=value (repetible)"),
    out: Optional[Path] = typer.Option(None, "--out", help="Directorio de salida"),
) -> None:
    """Run one experiment and write its trace and summary."""
    _execute(_load(config, set_), out)


@app.command()
@log_operation("train")
def train(
    config: Optional[Path] = typer.Argument(None, help="Archivo de experimento YAML"),
    set_: List[str] = typer.Option([], "--set", help="Override section.key=value (repetible)"),
    out: Optional[Path] = typer.Option(None, "--out", help="Directorio de salida"),
) -> None:
    """Same as run with workload.mode=train."""
    _execute(_load(config, [*set_, f"workload.mode={WorkloadMode.TRAIN.value}"]), out)


@app.command()
@log_operation("compare")
def compare(
    config: Optional[Path] = typer.Argument(None, help="Archivo de experimento YAML"),
    set_: List[str] = typer.Option([], "--set", help="Override section.key=value (repetible)"),
    out: Optional[Path] = typer.Option(None, "--out", help="Directorio de salida"),
) -> None:
    """Run Standard, CpuOnly, Naive and Superpipeline on identical inputs."""
    experiment = _load(config, set_)
    base = experiment.strategy
    if base.k is None or base.k_prime is None:
        raise _fail("compare needs strategy.k and strategy.k_prime", EXIT_CONFIG)

    strategies = [
        StrategyConfig.standard(base.transfer_mode),
        StrategyConfig.cpu_only(),
        StrategyConfig.naive(base.k, base.transfer_mode),
        StrategyConfig.superpipeline(base.k, base.k_prime, base.transfer_mode),
    ]
    model = experiment.model.build()
    rows, digests = [], set()
    for strategy in strategies:
        try:
            summary = run_workload(model, strategy, experiment.arena, experiment.workload).summary
        except OOMDeadlockError as exc:
            raise _fail(f"OOM-deadlock: {exc}", EXIT_OOM) from exc
        digests.add(summary.output_digest)
        rows.append([strategy.name, summary.peak_bytes, summary.per_item_time, strategy.k, strategy.k_prime])
        typer.echo(_one_line(summary))

    target = experiment.output_dir(out)
    target.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=COMPARE_COLUMNS).astype({"K": "Int64", "K'": "Int64"})
    frame.to_csv(target / "compare.csv", index=False, lineterminator="\n")

    if len(digests) != 1:
        raise _fail(f"fidelity failure: {len(digests)} distinct output digests", EXIT_FIDELITY)
    typer.echo(f"digest {digests.pop()} identical across {len(strategies)} strategies")


@app.command()
@log_operation("sweep")
def sweep(
    config: Optional[Path] = typer.Argument(None, help="Archivo de experimento YAML"),
    k: Optional[str] = typer.Option(None, "--k", help="Rango de k, p.ej. 2:8"),
    kprime: Optional[str] = typer.Option(None, "--kprime", help="Rango de k', p.ej. 1:7"),
    budget: Optional[int] = typer.Option(None, "--budget", help="Presupuesto de memoria en bytes"),
    objective: Optional[Objective] = typer.Option(None, "--objective"),
    set_: List[str] = typer.Option([], "--set", help="Override section.key=value (repetible)"),
    out: Optional[Path] = typer.Option(None, "--out", help="Directorio de salida"),
) -> None:
    """Grid-search (k, k') and write sweep.csv."""
    experiment = _load(config, set_)
    try:
        spec = experiment.sweep_spec(
            _parse_range(k, "--k"), _parse_range(kprime, "--kprime"), budget, objective
        )
    except ValueError as exc:
        raise _fail(str(exc), EXIT_CONFIG) from exc

    result = grid_search(experiment.model, experiment.arena, experiment.workload, spec)
    target = experiment.output_dir(out)
    target.mkdir(parents=True, exist_ok=True)
    result.to_frame().to_csv(target / "sweep.csv", index=False, lineterminator="\n")

    if result.best is None:
        typer.echo("none feasible")
    else:
        best = result.row(*result.best)
        typer.echo(
            f"best k={best.k} k'={best.k_prime} per_item={best.per_item_time:.6g}s peak={best.peak_bytes}B"
        )


@app.command("max-batch")
@log_operation("max-batch")
def max_batch(
    config: Optional[Path] = typer.Argument(None, help="Archivo de experimento YAML"),
    limit: int = typer.Option(1024, "--limit", min=1, help="Tamaño de batch maximo a probar"),
    set_: List[str] = typer.Option([], "--set", help="Override section.key=value (repetible)"),
) -> None:
    """Largest training batch that completes under the configured strategy."""
    experiment = _load(config, set_)
    best = max_feasible_batch(
        experiment.model,
        experiment.arena,
        experiment.strategy,
        experiment.workload.train_config,
        limit,
    )
    typer.echo(f"{experiment.strategy.label} max batch {best}")


@app.command()
def profiles() -> None:
    """List the built-in arena profiles."""
    for name, profile in ARENA_PROFILES.items():
        fields = " ".join(f"{key}={value:g}" for key, value in profile.model_dump().items())
        typer.echo(f"{name}: {fields}")


if __name__ == "__main__":
    app()
