"""
Residency strategy configuration.
"""

from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from src.device_arena.transfer import TransferMode


class StrategyConfigError(ValueError):
    """Strategy parameters that cannot describe a valid window for the model."""


class StrategyKind(str, Enum):
    STANDARD = "standard"
    CPU_ONLY = "cpu_only"
    NAIVE = "naive"
    SUPERPIPELINE = "superpipeline"


_DISPLAY_NAMES = {
    StrategyKind.STANDARD: "Standard",
    StrategyKind.CPU_ONLY: "CpuOnly",
    StrategyKind.NAIVE: "Naive",
    StrategyKind.SUPERPIPELINE: "Superpipeline",
}


class StrategyConfig(BaseModel):
    """Which residency policy to run and its window parameters."""

    model_config = {"extra": "forbid", "frozen": True}

    kind: StrategyKind = Field(default=StrategyKind.SUPERPIPELINE, description="Politica de residencia")
    k: Optional[int] = Field(default=None, ge=1, description="Particiones residentes a la vez")
    k_prime: Optional[int] = Field(default=None, ge=1, description="Tamaño del grupo de desalojo")
    transfer_mode: TransferMode = Field(default=TransferMode.BATCH)

    @model_validator(mode="after")
    def _check_window(self) -> "StrategyConfig":
        if self.kind is StrategyKind.SUPERPIPELINE:
            if self.k is None or self.k_prime is None:
                raise StrategyConfigError("superpipeline needs both k and k_prime")
            if self.k_prime >= self.k:
                raise StrategyConfigError(
                    f"superpipeline needs k_prime < k, got k={self.k} k_prime={self.k_prime}"
                )
        elif self.kind is StrategyKind.NAIVE:
            if self.k is None:
                raise StrategyConfigError("naive needs k")
        return self

    @property
    def name(self) -> str:
        return _DISPLAY_NAMES[self.kind]

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.SUPERPIPELINE:
            return f"{self.name}(k={self.k},k'={self.k_prime})"
        if self.kind is StrategyKind.NAIVE:
            return f"{self.name}(k={self.k})"
        return self.name

    def validate_for(self, n_layers: int) -> "StrategyConfig":
        """Raise ``StrategyConfigError`` unless the window fits a model of ``n_layers``."""
        if n_layers < 1:
            raise StrategyConfigError(f"n_layers must be >= 1, got {n_layers}")
        if self.kind in (StrategyKind.NAIVE, StrategyKind.SUPERPIPELINE) and self.k > n_layers:
            raise StrategyConfigError(f"{self.label}: k cannot exceed n_layers={n_layers}")
        return self

    @classmethod
    def standard(cls, transfer_mode: TransferMode = TransferMode.BATCH) -> "StrategyConfig":
        return cls(kind=StrategyKind.STANDARD, transfer_mode=transfer_mode)

    @classmethod
    def cpu_only(cls) -> "StrategyConfig":
        return cls(kind=StrategyKind.CPU_ONLY)

    @classmethod
    def naive(cls, k: int, transfer_mode: TransferMode = TransferMode.BATCH) -> "StrategyConfig":
        return cls(kind=StrategyKind.NAIVE, k=k, transfer_mode=transfer_mode)

    @classmethod
    def superpipeline(
        cls, k: int, k_prime: int, transfer_mode: TransferMode = TransferMode.BATCH
    ) -> "StrategyConfig":
        return cls(kind=StrategyKind.SUPERPIPELINE, k=k, k_prime=k_prime, transfer_mode=transfer_mode)
