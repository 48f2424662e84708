"""
Qualitative trends of the strategies under the simulator's cost model.

All runs use the 8-layer default experiment: one compute step takes 1 s, a
layer goes up in 0.8 s and comes back in 6.4 s, the host computes fifty times
slower than the device.
"""

from __future__ import annotations

import pytest

from src.cli.experiment import ExperimentConfig
from src.device_arena import OOMDeadlockError
from src.exec_engine import WorkloadMode, run_workload
from src.scheduler import StrategyConfig, TransferMode
from src.tuner import Objective, SweepSpec, grid_search, objective_key
from src.tuner.grid import SweepRow

FLOAT_SLACK = 1e-9


@pytest.fixture
def default_experiment(experiments_dir) -> ExperimentConfig:
    return ExperimentConfig.from_yaml(experiments_dir / "default.yaml")


def per_item(experiment: ExperimentConfig, strategy: StrategyConfig, **arena_updates) -> float:
    arena = experiment.arena.model_copy(update=arena_updates)
    return run_workload(experiment.model.build(), strategy, arena, experiment.workload).summary.per_item_time


def test_strategy_ordering_for_every_window(default_experiment):
    standard = per_item(default_experiment, StrategyConfig.standard())
    cpu_only = per_item(default_experiment, StrategyConfig.cpu_only())

    for k in range(2, 8):
        naive = per_item(default_experiment, StrategyConfig.naive(k))
        assert naive < cpu_only, f"Naive(k={k})"
        for k_prime in range(1, k):
            superpipeline = per_item(default_experiment, StrategyConfig.superpipeline(k, k_prime))
            assert standard < superpipeline < naive, f"Superpipeline(k={k},k'={k_prime})"


def sweep_k(experiment: ExperimentConfig, k_prime: int) -> list:
    model = experiment.model.build()
    return [
        run_workload(model, StrategyConfig.superpipeline(k, k_prime), experiment.arena, experiment.workload).summary
        for k in range(k_prime + 1, 9)
    ]


@pytest.mark.parametrize("k_prime", range(1, 8))
def test_larger_window_is_never_slower(default_experiment, k_prime):
    times = [summary.per_item_time for summary in sweep_k(default_experiment, k_prime)]

    assert all(later <= earlier + FLOAT_SLACK for earlier, later in zip(times, times[1:])), times
    # a window spanning the whole model never evicts and runs at the standard pace
    assert times[-1] == pytest.approx(8.0)


def test_single_layer_groups_wait_on_the_eviction_chain(default_experiment):
    times = [summary.per_item_time for summary in sweep_k(default_experiment, 1)]

    # each extra layer of window moves the blocking reload 1.6 s earlier
    assert times[0] == pytest.approx(47.1)
    assert times[-2] == pytest.approx(39.1)
    steps = [earlier - later for earlier, later in zip(times[:-2], times[1:-1])]
    assert steps == pytest.approx([1.6] * 5)


@pytest.mark.parametrize("k_prime", range(1, 8))
def test_larger_window_never_lowers_peak_bytes(default_experiment, k_prime):
    layer_bytes = default_experiment.model.layer_bytes
    workspace = default_experiment.workload.activation_bytes(default_experiment.model.d)

    peaks = [summary.peak_bytes for summary in sweep_k(default_experiment, k_prime)]

    expected = [min(k + k_prime, 8) * layer_bytes + workspace for k in range(k_prime + 1, 9)]
    assert peaks == expected


@pytest.mark.parametrize(
    "strategy",
    [
        StrategyConfig.standard(),
        StrategyConfig.naive(4),
        StrategyConfig.superpipeline(4, 2),
        StrategyConfig.superpipeline(6, 3),
    ],
    ids=lambda s: s.label,
)
def test_batch_transfers_beat_sequential_when_calls_cost_latency(default_experiment, strategy):
    model = default_experiment.model.build()
    arena = default_experiment.arena.model_copy(update={"per_call_latency": 2.0})
    sequential = strategy.model_copy(update={"transfer_mode": TransferMode.SEQUENTIAL})

    batch_run = run_workload(model, strategy, arena, default_experiment.workload)
    sequential_run = run_workload(model, sequential, arena, default_experiment.workload)

    assert batch_run.summary.makespan < sequential_run.summary.makespan
    assert batch_run.summary.output_digest == sequential_run.summary.output_digest


def test_slow_eviction_stalls_shrink_as_bandwidth_doubles(experiments_dir):
    experiment = ExperimentConfig.from_yaml(experiments_dir / "stall_law.yaml")
    model = experiment.model.build()
    strategy = experiment.strategy
    seconds_per_layer = model.layer_bytes[0] / experiment.arena.d2h_bandwidth
    assert strategy.k_prime * seconds_per_layer > (strategy.k - strategy.k_prime) * 1.0

    stalls = []
    for factor in (1, 2, 4, 8):
        arena = experiment.arena.model_copy(update={"d2h_bandwidth": experiment.arena.d2h_bandwidth * factor})
        stalls.append(run_workload(model, strategy, arena, experiment.workload).summary.total_stall_time)

    assert stalls[0] > 0
    assert all(later <= earlier + FLOAT_SLACK for earlier, later in zip(stalls, stalls[1:])), stalls
    assert stalls[-1] < stalls[0]


def test_training_fits_only_with_windowed_offload(experiments_dir):
    experiment = ExperimentConfig.from_yaml(experiments_dir / "train_oom.yaml")
    model = experiment.model.build()
    assert experiment.workload.mode is WorkloadMode.TRAIN

    with pytest.raises(OOMDeadlockError):
        run_workload(model, StrategyConfig.standard(), experiment.arena, experiment.workload)

    run = run_workload(model, experiment.strategy, experiment.arena, experiment.workload)
    assert run.summary.peak_bytes <= experiment.arena.capacity_bytes


def independent_row(experiment: ExperimentConfig, k: int, k_prime: int, budget: int) -> SweepRow:
    arena = experiment.arena.model_copy(update={"capacity_bytes": budget})
    try:
        summary = run_workload(
            experiment.model.build(), StrategyConfig.superpipeline(k, k_prime), arena, experiment.workload
        ).summary
    except OOMDeadlockError:
        return SweepRow(k=k, k_prime=k_prime, feasible=False, reason="oom")
    return SweepRow(
        k=k, k_prime=k_prime, feasible=True, peak_bytes=summary.peak_bytes, per_item_time=summary.per_item_time
    )


@pytest.mark.parametrize("objective", list(Objective))
def test_sweep_best_matches_exhaustive_recheck(default_experiment, objective):
    spec = SweepSpec(k_range=(2, 8), k_prime_range=(1, 7), budget_bytes=7000, objective=objective)

    result = grid_search(default_experiment.model, default_experiment.arena, default_experiment.workload, spec)

    feasible = [row for row in result.table if row.feasible]
    rechecked = [independent_row(default_experiment, row.k, row.k_prime, 7000) for row in feasible]
    assert [(r.peak_bytes, r.per_item_time) for r in rechecked] == [
        (r.peak_bytes, r.per_item_time) for r in feasible
    ]
    winner = min(rechecked, key=lambda row: objective_key(objective, row))
    assert result.best == (winner.k, winner.k_prime)


def test_unbounded_sweep_best_is_fastest_of_all_pairs(default_experiment):
    spec = SweepSpec(k_range=(2, 8), k_prime_range=(1, 7), budget_bytes=10_000_000)

    result = grid_search(default_experiment.model, default_experiment.arena, default_experiment.workload, spec)

    assert all(row.feasible for row in result.table)
    best_time = result.row(*result.best).per_item_time
    for k, k_prime in spec.pairs(8):
        assert best_time <= independent_row(default_experiment, k, k_prime, 10_000_000).per_item_time
