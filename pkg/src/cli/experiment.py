"""
Experiment files: one YAML document describing a full run.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional, Sequence

import yaml
from pydantic import BaseModel, Field, model_validator

from config.settings import get_settings
from src.device_arena import ArenaConfig, get_profile
from src.exec_engine import WorkloadConfig
from src.model_core import ModelConfig
from src.scheduler import StrategyConfig
from src.tuner import Objective, SweepSpec


class OutputConfig(BaseModel):
    model_config = {"extra": "forbid"}

    dir: Optional[Path] = Field(default=None, description="Directorio de artefactos del experimento")
    formats: list[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])


class SweepSection(BaseModel):
    model_config = {"extra": "forbid"}

    k_range: Optional[tuple[int, int]] = None
    k_prime_range: Optional[tuple[int, int]] = None
    budget_bytes: Optional[int] = Field(default=None, gt=0)
    objective: Objective = Objective.MIN_PER_ITEM_TIME


class ExperimentConfig(BaseModel):
    """Schema of ``config/experiments/*.yaml``; unknown keys are rejected at every level."""

    model_config = {"extra": "forbid"}

    model: ModelConfig = Field(default_factory=ModelConfig)
    arena: ArenaConfig = Field(default_factory=ArenaConfig)
    workload: WorkloadConfig = Field(default_factory=WorkloadConfig)
    strategy: StrategyConfig = Field(
        default_factory=lambda: StrategyConfig.superpipeline(4, 2)
    )
    output: OutputConfig = Field(default_factory=OutputConfig)
    sweep: SweepSection = Field(default_factory=SweepSection)

    @model_validator(mode="before")
    @classmethod
    def _expand_profile(cls, data: Any) -> Any:
        if not isinstance(data, dict) or not isinstance(data.get("arena"), dict):
            return data
        arena = dict(data["arena"])
        profile = arena.pop("profile", None)
        if profile is not None:
            arena = {**get_profile(profile).model_dump(), **arena}
        return {**data, "arena": arena}

    @model_validator(mode="after")
    def _check_strategy(self) -> "ExperimentConfig":
        self.strategy.validate_for(self.model.n_layers)
        return self

    @classmethod
    def from_yaml(cls, path: Path | str) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"experiment file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ValueError(f"{path} is not valid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"{path} must contain a mapping at the top level")
        return cls.model_validate(data)

    def with_overrides(self, overrides: Sequence[str]) -> "ExperimentConfig":
        """Apply ``section.key=value`` overrides; values are parsed as YAML scalars."""
        data = self.model_dump(mode="json", exclude_none=True)
        for override in overrides:
            key, sep, raw = override.partition("=")
            if not sep or not key:
                raise ValueError(f"override must look like section.key=value, got '{override}'")
            node = data
            *parents, leaf = key.strip().split(".")
            for part in parents:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise ValueError(f"override '{key}' does not address a section")
            node[leaf] = yaml.safe_load(raw)
        return type(self).model_validate(data)

    def output_dir(self, flag: Optional[Path] = None) -> Path:
        """Flag, then the file's ``output.dir``, then ``SUPERPIPE_OUTPUT_DIR``."""
        if flag is not None:
            return flag
        if self.output.dir is not None:
            return self.output.dir
        return get_settings().output_dir

    def sweep_spec(
        self,
        k_range: Optional[tuple[int, int]] = None,
        k_prime_range: Optional[tuple[int, int]] = None,
        budget_bytes: Optional[int] = None,
        objective: Optional[Objective] = None,
    ) -> SweepSpec:
        n_layers = self.model.n_layers
        return SweepSpec(
            k_range=k_range or self.sweep.k_range or (2, n_layers),
            k_prime_range=k_prime_range or self.sweep.k_prime_range or (1, max(n_layers - 1, 1)),
            budget_bytes=budget_bytes or self.sweep.budget_bytes or self.arena.capacity_bytes,
            objective=objective or self.sweep.objective,
            transfer_mode=self.strategy.transfer_mode,
        )
