"""
Largest training batch that fits the arena under a given strategy.
"""

from __future__ import annotations

import logging

from src.device_arena import ArenaConfig, OOMDeadlockError
from src.exec_engine import TrainConfig, run_train_step
from src.model_core import ModelConfig, make_inputs, make_target
from src.scheduler import StrategyConfig

logger = logging.getLogger(__name__)


def _fits(
    model_cfg: ModelConfig,
    arena_cfg: ArenaConfig,
    strategy: StrategyConfig,
    train_cfg: TrainConfig,
    batch: int,
) -> bool:
    model = model_cfg.build()
    x = make_inputs(model_cfg.seed, 1, batch, model_cfg.d)[0]
    target = make_target(model_cfg.seed, batch, model_cfg.d)
    config = train_cfg.model_copy(update={"batch_size": batch})
    try:
        run_train_step(model, x, target, strategy, arena_cfg, config)
    except OOMDeadlockError:
        return False
    return True


def max_feasible_batch(
    model_cfg: ModelConfig,
    arena_cfg: ArenaConfig,
    strategy: StrategyConfig,
    train_cfg: TrainConfig,
    limit: int = 1024,
) -> int:
    """
    Largest batch size ``<= limit`` whose training step completes.

    Probes 1, 2, 4, ... until a failure, then bisects. Returns 0 when a
    single row does not fit.
    """
    if limit < 1:
        raise ValueError(f"limit must be >= 1, got {limit}")
    if not _fits(model_cfg, arena_cfg, strategy, train_cfg, 1):
        return 0

    good, bad = 1, None
    while bad is None:
        probe = min(good * 2, limit)
        if probe == good:
            return good
        if _fits(model_cfg, arena_cfg, strategy, train_cfg, probe):
            good = probe
        else:
            bad = probe

    while bad - good > 1:
        middle = (good + bad) // 2
        if _fits(model_cfg, arena_cfg, strategy, train_cfg, middle):
            good = middle
        else:
            bad = middle
    logger.info(f"{strategy.label}: max feasible batch {good} (limit {limit})")
    return good
