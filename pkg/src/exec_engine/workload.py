"""
Workload parameters for inference streams and training steps.
"""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, Field

from src.model_core.blocks import FLOAT_BYTES, Tensor, make_inputs, make_target


class WorkloadMode(str, Enum):
    INFER = "infer"
    TRAIN = "train"


class TrainConfig(BaseModel):
    model_config = {"extra": "forbid"}

    lr: float = Field(default=0.01, gt=0, description="Tasa de aprendizaje de SGD")
    checkpointing: bool = Field(default=False, description="Descargar activaciones al host en el forward")
    batch_size: int = Field(default=4, ge=1, description="Filas por tensor de entrada")


class WorkloadConfig(BaseModel):
    """What to run: a stream of ``n_items`` forward passes or one training step."""

    model_config = {"extra": "forbid"}

    mode: WorkloadMode = WorkloadMode.INFER
    n_items: int = Field(default=4, ge=1, description="Pasadas forward consecutivas (inferencia)")
    batch_size: int = Field(default=4, ge=1, description="Filas por tensor de entrada")
    lr: float = Field(default=0.01, gt=0)
    checkpointing: bool = False
    input_seed: int | None = Field(default=None, description="Semilla de entradas; por defecto la del modelo")

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, checkpointing=self.checkpointing, batch_size=self.batch_size)

    def activation_bytes(self, d: int) -> int:
        return self.batch_size * d * FLOAT_BYTES

    def seed(self, model_seed: int) -> int:
        return model_seed if self.input_seed is None else self.input_seed

    def make_inputs(self, model_seed: int, d: int) -> list[Tensor]:
        return make_inputs(self.seed(model_seed), self.n_items, self.batch_size, d)

    def make_batch(self, model_seed: int, d: int) -> tuple[Tensor, Tensor]:
        seed = self.seed(model_seed)
        return make_inputs(seed, 1, self.batch_size, d)[0], make_target(seed, self.batch_size, d)
