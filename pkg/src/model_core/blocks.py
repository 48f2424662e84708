"""
Synthetic layered model: a chain of identical dense blocks standing in for the
repeating layers of a large network.

Weights and workloads are drawn from a counter-based splitmix64 stream keyed by
(seed, stream tag, index), so a model or an input batch is a pure function of
its parameters on any machine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field, model_validator

Tensor = npt.NDArray[np.float32]

FLOAT_BYTES = 4
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# stream tags keep weights, inputs and targets on disjoint sequences
_TAG_WEIGHTS = 0x57
_TAG_INPUTS = 0x1F
_TAG_TARGET = 0x7A


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


def _mix64(value: int) -> int:
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _stream_state(seed: int, tag: int, index: int) -> int:
    state = _mix64(seed * _GOLDEN + tag)
    return _mix64(state + (index + 1) * 0xD1B54A32D192ED03)


def splitmix64(state: int, count: int) -> npt.NDArray[np.uint64]:
    """Return ``count`` consecutive splitmix64 outputs starting after ``state``."""
    steps = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(state & _MASK64) + steps * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def uniform_stream(seed: int, tag: int, index: int, count: int, bound: float) -> npt.NDArray[np.float32]:
    """Uniform values in [-bound, +bound) from the (seed, tag, index) stream."""
    raw = splitmix64(_stream_state(seed, tag, index), count)
    unit = (raw >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
    return ((2.0 * unit - 1.0) * bound).astype(np.float32)


def as_tensor(values: Sequence[float] | np.ndarray, shape: Sequence[int]) -> Tensor:
    """Build a float32 tensor, checking that ``shape`` covers exactly ``values``."""
    flat = np.asarray(values, dtype=np.float32).reshape(-1)
    expected = math.prod(shape)
    if expected != flat.size:
        raise ValueError(f"shape {list(shape)} needs {expected} values, got {flat.size}")
    return flat.reshape(tuple(shape))


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=np.float32)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LayerBlock:
    """One repeating partition: ``y = act(x @ weight + bias)``."""

    index: int
    weight: Tensor
    bias: Tensor
    activation: Activation = Activation.RELU
    frozen: bool = False

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.weight.shape[0] != self.weight.shape[1]:
            raise ValueError(f"block {self.index}: weight must be square, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError(f"block {self.index}: bias shape {self.bias.shape} does not match d")
        object.__setattr__(self, "weight", _readonly(self.weight))
        object.__setattr__(self, "bias", _readonly(self.bias))

    @property
    def d(self) -> int:
        return int(self.weight.shape[0])

    @property
    def weight_bytes(self) -> int:
        return (self.d * self.d + self.d) * FLOAT_BYTES

    def with_params(self, weight: Tensor, bias: Tensor) -> "LayerBlock":
        return LayerBlock(self.index, weight, bias, self.activation, self.frozen)


@dataclass(frozen=True)
class LayeredModel:
    d: int
    n_layers: int
    blocks: tuple[LayerBlock, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.blocks) != self.n_layers:
            raise ValueError(f"expected {self.n_layers} blocks, got {len(self.blocks)}")
        for position, block in enumerate(self.blocks):
            if block.index != position:
                raise ValueError(f"block at position {position} carries index {block.index}")
            if block.d != self.d:
                raise ValueError(f"block {position} has width {block.d}, model width is {self.d}")

    @property
    def layer_bytes(self) -> list[int]:
        return [block.weight_bytes for block in self.blocks]

    @property
    def frozen_layers(self) -> list[int]:
        return [block.index for block in self.blocks if block.frozen]

    def replace_blocks(self, blocks: Sequence[LayerBlock]) -> "LayeredModel":
        return LayeredModel(self.d, self.n_layers, tuple(blocks), self.seed)


def build_model(seed: int, n_layers: int, d: int, frozen_prefix: int = 0) -> LayeredModel:
    """
    Build a deterministic model of ``n_layers`` dense blocks of width ``d``.

    Every block uses ReLU except the last, which is linear. The first
    ``frozen_prefix`` blocks are marked frozen.
    """
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not 0 <= frozen_prefix <= n_layers:
        raise ValueError(f"frozen_prefix must be in [0, {n_layers}], got {frozen_prefix}")

    bound = 1.0 / math.sqrt(d)
    blocks = []
    for index in range(n_layers):
        params = uniform_stream(seed, _TAG_WEIGHTS, index, d * d + d, bound)
        blocks.append(
            LayerBlock(
                index=index,
                weight=params[: d * d].reshape(d, d),
                bias=params[d * d:],
                activation=Activation.IDENTITY if index == n_layers - 1 else Activation.RELU,
                frozen=index < frozen_prefix,
            )
        )
    return LayeredModel(d=d, n_layers=n_layers, blocks=tuple(blocks), seed=seed)


def make_inputs(seed: int, n_items: int, batch_size: int, d: int) -> list[Tensor]:
    """One ``[batch_size, d]`` input per item, values in [-1, 1)."""
    if n_items < 1 or batch_size < 1 or d < 1:
        raise ValueError("n_items, batch_size and d must all be >= 1")
    return [
        uniform_stream(seed, _TAG_INPUTS, item, batch_size * d, 1.0).reshape(batch_size, d)
        for item in range(n_items)
    ]


def make_target(seed: int, batch_size: int, d: int) -> Tensor:
    if batch_size < 1 or d < 1:
        raise ValueError("batch_size and d must be >= 1")
    return uniform_stream(seed, _TAG_TARGET, 0, batch_size * d, 1.0).reshape(batch_size, d)


class ModelConfig(BaseModel):
    """Parameters of the synthetic model as they appear in experiment files."""

    model_config = {"extra": "forbid"}

    seed: int = Field(default=7, description="Semilla del generador splitmix64")
    n_layers: int = Field(default=8, ge=1)
    d: int = Field(default=16, ge=1)
    frozen_prefix: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_prefix(self) -> "ModelConfig":
        if self.frozen_prefix > self.n_layers:
            raise ValueError(
                f"frozen_prefix ({self.frozen_prefix}) cannot exceed n_layers ({self.n_layers})"
            )
        return self

    @property
    def layer_bytes(self) -> int:
        return (self.d * self.d + self.d) * FLOAT_BYTES

    def build(self) -> LayeredModel:
        return build_model(self.seed, self.n_layers, self.d, self.frozen_prefix)
