"""
Bitwise fidelity checks against the all-resident reference.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from src.model_core import LayeredModel, Tensor, reference_forward


def _digest(arrays: Iterable[np.ndarray], prefix: bytes = b"") -> str:
    hasher = hashlib.sha256(prefix)
    for array in arrays:
        array = np.ascontiguousarray(array)
        hasher.update(str(array.shape).encode("ascii"))
        hasher.update(array.dtype.str.encode("ascii"))
        hasher.update(array.astype(array.dtype.newbyteorder("<")).tobytes())
    return hasher.hexdigest()


def output_digest(outputs: Sequence[Tensor]) -> str:
    """Stable sha256 over shapes and little-endian float32 bytes of every output."""
    return _digest((np.asarray(out, dtype=np.float32) for out in outputs), b"outputs")


def train_digest(loss: float, model: LayeredModel) -> str:
    arrays = [np.asarray([loss], dtype=np.float64)]
    for block in model.blocks:
        arrays.extend([block.weight, block.bias])
    return _digest(arrays, b"train")


def bitwise_equal(left: np.ndarray, right: np.ndarray) -> bool:
    left, right = np.asarray(left), np.asarray(right)
    return left.shape == right.shape and left.dtype == right.dtype and left.tobytes() == right.tobytes()


@dataclass(frozen=True)
class FidelityReport:
    digest: str
    reference_digest: str
    identical: bool


def verify_fidelity(outputs: Sequence[Tensor], model: LayeredModel, inputs: Sequence[Tensor]) -> FidelityReport:
    """Recompute the reference outputs and compare bit for bit."""
    expected = [reference_forward(model, x) for x in inputs]
    identical = len(outputs) == len(expected) and all(
        bitwise_equal(np.asarray(out, dtype=np.float32), ref) for out, ref in zip(outputs, expected)
    )
    return FidelityReport(output_digest(outputs), output_digest(expected), identical)
