"""
Per-block math and the all-resident reference execution.

Matrix products accumulate in float64 over the inner dimension in ascending
order and round once to float32. The order is fixed, so results do not depend
on the BLAS build and every execution strategy reproduces the reference bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src.model_core.blocks import Activation, LayerBlock, LayeredModel, Tensor


def ordered_matmul(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """``left @ right`` in float64, summing the inner dimension in index order."""
    left64 = np.asarray(left, dtype=np.float64)
    right64 = np.asarray(right, dtype=np.float64)
    acc = np.zeros((left64.shape[0], right64.shape[1]), dtype=np.float64)
    for j in range(left64.shape[1]):
        acc += np.multiply.outer(left64[:, j], right64[j, :])
    return acc


def _check_input(block: LayerBlock, x: Tensor, name: str = "x") -> None:
    if x.ndim != 2 or x.shape[1] != block.d:
        raise ValueError(
            f"block {block.index}: {name} must have shape [b, {block.d}], got {list(x.shape)}"
        )


def _affine(block: LayerBlock, x: Tensor) -> Tensor:
    z = ordered_matmul(x, block.weight) + block.bias.astype(np.float64)[None, :]
    return z.astype(np.float32)


def _activate(block: LayerBlock, z: Tensor) -> Tensor:
    if block.activation is Activation.RELU:
        return np.where(z > 0, z, np.float32(0.0)).astype(np.float32)
    return z


def layer_forward(block: LayerBlock, x: Tensor) -> Tensor:
    _check_input(block, x)
    return _activate(block, _affine(block, x))


def layer_backward(block: LayerBlock, x: Tensor, dy: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    """
    Backprop through ``act(x @ W + b)``.

    ``x`` must be the exact input seen in forward. ReLU's derivative at 0 is 0.

    Returns:
        (dx, dW, db)
    """
    _check_input(block, x)
    if dy.shape != x.shape:
        raise ValueError(
            f"block {block.index}: dy shape {list(dy.shape)} does not match x {list(x.shape)}"
        )
    dy = np.asarray(dy, dtype=np.float32)
    if block.activation is Activation.RELU:
        dz = np.where(_affine(block, x) > 0, dy, np.float32(0.0)).astype(np.float32)
    else:
        dz = dy

    dx = ordered_matmul(dz, block.weight.T).astype(np.float32)
    dw = ordered_matmul(x.T, dz).astype(np.float32)
    db = dz.astype(np.float64).sum(axis=0).astype(np.float32)
    return dx, dw, db


def sgd_update(block: LayerBlock, dw: Tensor, db: Tensor, lr: float) -> LayerBlock:
    step = np.float32(lr)
    weight = (block.weight - step * dw).astype(np.float32)
    bias = (block.bias - step * db).astype(np.float32)
    return block.with_params(weight, bias)


def mse_loss(prediction: Tensor, target: Tensor) -> tuple[float, Tensor]:
    """Mean squared error over all entries and its gradient w.r.t. ``prediction``."""
    if prediction.shape != target.shape:
        raise ValueError(
            f"target shape {list(target.shape)} does not match output {list(prediction.shape)}"
        )
    diff = prediction.astype(np.float64) - target.astype(np.float64)
    loss = float(np.mean(diff * diff))
    grad = (2.0 * diff / diff.size).astype(np.float32)
    return loss, grad


def reference_forward(model: LayeredModel, x: Tensor) -> Tensor:
    """All-resident forward pass; the fidelity oracle for every strategy."""
    out = np.asarray(x, dtype=np.float32)
    if out.ndim != 2 or out.shape[1] != model.d:
        raise ValueError(f"input must have shape [b, {model.d}], got {list(out.shape)}")
    for block in model.blocks:
        out = layer_forward(block, out)
    return out


@dataclass
class TrainStepResult:
    loss: float
    gradients: dict[int, tuple[Tensor, Tensor]] = field(default_factory=dict)
    model: LayeredModel | None = None


def reference_train_step(model: LayeredModel, x: Tensor, target: Tensor, lr: float) -> TrainStepResult:
    """
    Full-resident forward, MSE loss, reverse-order backward and plain SGD.

    Frozen blocks get no gradient entry and keep their weights.
    """
    if lr <= 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ValueError(f"input must have shape [b, {model.d}], got {list(x.shape)}")

    inputs: list[Tensor] = []
    out = x
    for block in model.blocks:
        inputs.append(out)
        out = layer_forward(block, out)

    loss, grad = mse_loss(out, np.asarray(target, dtype=np.float32))

    gradients: dict[int, tuple[Tensor, Tensor]] = {}
    updated = list(model.blocks)
    for block in reversed(model.blocks):
        dx, dw, db = layer_backward(block, inputs[block.index], grad)
        if not block.frozen:
            gradients[block.index] = (dw, db)
            updated[block.index] = sgd_update(block, dw, db, lr)
        grad = dx

    return TrainStepResult(loss=loss, gradients=gradients, model=model.replace_blocks(updated))
