from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.model_core import (
    Activation,
    LayerBlock,
    LayeredModel,
    ModelConfig,
    as_tensor,
    build_model,
    layer_backward,
    layer_forward,
    make_inputs,
    make_target,
    mse_loss,
    reference_forward,
    reference_train_step,
)
from src.model_core.ops import ordered_matmul


def loop_forward(block: LayerBlock, x: np.ndarray) -> np.ndarray:
    """Plain-Python oracle: float sums in inner-index order, one rounding to float32."""
    b, d = x.shape
    out = np.zeros((b, d), dtype=np.float32)
    for row in range(b):
        for col in range(d):
            acc = 0.0
            for inner in range(d):
                acc += float(x[row, inner]) * float(block.weight[inner, col])
            acc += float(block.bias[col])
            value = np.float32(acc)
            if block.activation is Activation.RELU and not value > 0:
                value = np.float32(0.0)
            out[row, col] = value
    return out


def test_build_model_is_deterministic():
    first = build_model(seed=7, n_layers=4, d=8)
    second = build_model(seed=7, n_layers=4, d=8)

    for a, b in zip(first.blocks, second.blocks):
        assert a.weight.tobytes() == b.weight.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()


def test_different_seeds_give_different_weights():
    first = build_model(seed=1, n_layers=1, d=8)
    second = build_model(seed=2, n_layers=1, d=8)

    assert first.blocks[0].weight.tobytes() != second.blocks[0].weight.tobytes()


def test_weights_stay_within_init_bound():
    model = build_model(seed=3, n_layers=3, d=16)
    bound = 1.0 / math.sqrt(16)

    for block in model.blocks:
        assert np.all(np.abs(block.weight) <= bound)
        assert np.all(np.abs(block.bias) <= bound)


def test_activation_layout_and_frozen_prefix():
    model = build_model(seed=3, n_layers=4, d=4, frozen_prefix=2)

    assert [block.activation for block in model.blocks] == [
        Activation.RELU,
        Activation.RELU,
        Activation.RELU,
        Activation.IDENTITY,
    ]
    assert model.frozen_layers == [0, 1]


def test_layer_bytes_counts_weight_and_bias():
    model = build_model(seed=7, n_layers=8, d=16)

    assert model.layer_bytes == [1088] * 8
    assert ModelConfig().layer_bytes == 1088


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_layers": 0, "d": 4},
        {"n_layers": 2, "d": 0},
        {"n_layers": 2, "d": 4, "frozen_prefix": 3},
    ],
)
def test_build_model_rejects_bad_arguments(kwargs):
    with pytest.raises(ValueError):
        build_model(seed=1, **kwargs)


def test_weights_are_read_only():
    block = build_model(seed=1, n_layers=1, d=2).blocks[0]

    with pytest.raises(ValueError):
        block.weight[0, 0] = 1.0


def test_model_config_rejects_unknown_keys_and_bad_prefix():
    with pytest.raises(ValidationError):
        ModelConfig(seed=1, layers=3)
    with pytest.raises(ValidationError):
        ModelConfig(n_layers=2, frozen_prefix=5)


def test_as_tensor_checks_shape():
    tensor = as_tensor([1, 2, 3, 4], [2, 2])

    assert tensor.dtype == np.float32
    assert tensor.shape == (2, 2)
    with pytest.raises(ValueError):
        as_tensor([1, 2, 3], [2, 2])


def test_ordered_matmul_matches_python_loop():
    left = make_inputs(seed=9, n_items=1, batch_size=3, d=5)[0]
    right = build_model(seed=9, n_layers=1, d=5).blocks[0].weight

    result = ordered_matmul(left, right)

    for row in range(3):
        for col in range(5):
            acc = 0.0
            for inner in range(5):
                acc += float(left[row, inner]) * float(right[inner, col])
            assert result[row, col] == acc


def test_layer_forward_is_bit_exact_against_loop_oracle():
    model = build_model(seed=11, n_layers=2, d=6)
    x = make_inputs(seed=11, n_items=1, batch_size=4, d=6)[0]

    for block in model.blocks:
        expected = loop_forward(block, x)
        got = layer_forward(block, x)
        assert got.tobytes() == expected.tobytes()
        x = got


def test_relu_never_emits_negative_zero():
    block = LayerBlock(
        index=0,
        weight=np.zeros((2, 2), dtype=np.float32),
        bias=np.array([-0.0, -1.0], dtype=np.float32),
    )
    out = layer_forward(block, np.ones((1, 2), dtype=np.float32))

    assert not np.any(np.signbit(out))


def test_reference_forward_rejects_wrong_width():
    model = build_model(seed=1, n_layers=2, d=4)

    with pytest.raises(ValueError):
        reference_forward(model, np.zeros((2, 3), dtype=np.float32))


def test_mse_loss_value_and_gradient():
    prediction = np.array([[1.0, 2.0]], dtype=np.float32)
    target = np.array([[0.0, 0.0]], dtype=np.float32)

    loss, grad = mse_loss(prediction, target)

    assert loss == pytest.approx(2.5)
    assert grad.tolist() == [[1.0, 2.0]]
    with pytest.raises(ValueError):
        mse_loss(prediction, np.zeros((2, 2), dtype=np.float32))


def test_layer_backward_matches_central_differences():
    d = 3
    rng_block = build_model(seed=21, n_layers=1, d=d).blocks[0]
    assert rng_block.activation is Activation.IDENTITY
    x = make_inputs(seed=21, n_items=1, batch_size=2, d=d)[0]
    target = make_target(seed=21, batch_size=2, d=d)

    _, grad = mse_loss(layer_forward(rng_block, x), target)
    _, dw, db = layer_backward(rng_block, x, grad)

    w64 = rng_block.weight.astype(np.float64)
    b64 = rng_block.bias.astype(np.float64)
    x64 = x.astype(np.float64)
    t64 = target.astype(np.float64)

    def loss64(weight, bias):
        diff = x64 @ weight + bias - t64
        return float(np.mean(diff * diff))

    eps = 1e-3
    for i in range(d):
        for j in range(d):
            up, down = w64.copy(), w64.copy()
            up[i, j] += eps
            down[i, j] -= eps
            numeric = (loss64(up, b64) - loss64(down, b64)) / (2 * eps)
            assert dw[i, j] == pytest.approx(numeric, rel=1e-4, abs=1e-6)
    for j in range(d):
        up, down = b64.copy(), b64.copy()
        up[j] += eps
        down[j] -= eps
        numeric = (loss64(w64, up) - loss64(w64, down)) / (2 * eps)
        assert db[j] == pytest.approx(numeric, rel=1e-4, abs=1e-6)


def test_reference_train_step_skips_frozen_blocks():
    model = build_model(seed=4, n_layers=4, d=4, frozen_prefix=2)
    x = make_inputs(seed=4, n_items=1, batch_size=2, d=4)[0]
    target = make_target(seed=4, batch_size=2, d=4)

    result = reference_train_step(model, x, target, lr=0.1)

    assert sorted(result.gradients) == [2, 3]
    for index in (0, 1):
        assert result.model.blocks[index].weight.tobytes() == model.blocks[index].weight.tobytes()
    for index in (2, 3):
        assert result.model.blocks[index].weight.tobytes() != model.blocks[index].weight.tobytes()
    assert result.loss > 0


def test_reference_train_step_rejects_non_positive_lr():
    model = build_model(seed=4, n_layers=1, d=2)
    x = np.zeros((1, 2), dtype=np.float32)

    with pytest.raises(ValueError):
        reference_train_step(model, x, x, lr=0.0)


def test_make_inputs_and_target_are_deterministic_and_distinct():
    first = make_inputs(seed=3, n_items=2, batch_size=2, d=4)
    second = make_inputs(seed=3, n_items=2, batch_size=2, d=4)
    target = make_target(seed=3, batch_size=2, d=4)

    assert [x.shape for x in first] == [(2, 4), (2, 4)]
    assert all(a.tobytes() == b.tobytes() for a, b in zip(first, second))
    assert first[0].tobytes() != first[1].tobytes()
    assert target.tobytes() != first[0].tobytes()
    assert np.all(np.abs(target) <= 1.0)


def forward64(weights, biases, activations, x):
    out = x.astype(np.float64)
    for weight, bias, activation in zip(weights, biases, activations):
        out = out @ weight + bias
        if activation is Activation.RELU:
            out = np.maximum(out, 0.0)
    return out


def test_two_scalar_blocks_follow_the_chain_rule():
    first = LayerBlock(
        index=0, weight=np.array([[0.5]], dtype=np.float32), bias=np.array([0.25], dtype=np.float32)
    )
    second = LayerBlock(
        index=1,
        weight=np.array([[-2.0]], dtype=np.float32),
        bias=np.zeros(1, dtype=np.float32),
        activation=Activation.IDENTITY,
    )
    model = LayeredModel(d=1, n_layers=2, blocks=(first, second))
    x = np.array([[3.0]], dtype=np.float32)

    result = reference_train_step(model, x, np.zeros((1, 1), dtype=np.float32), lr=0.1)

    # hidden 1.75, output -3.5, dL/dout -7
    assert result.loss == 12.25
    assert result.gradients[1][0].tolist() == [[-12.25]]
    assert result.gradients[1][1].tolist() == [-7.0]
    assert result.gradients[0][0].tolist() == [[42.0]]
    assert result.gradients[0][1].tolist() == [14.0]


def test_layer_backward_on_a_scalar_block():
    block = LayerBlock(
        index=0,
        weight=np.array([[0.5]], dtype=np.float32),
        bias=np.zeros(1, dtype=np.float32),
        activation=Activation.IDENTITY,
    )

    dx, dw, db = layer_backward(block, np.array([[3.0]], dtype=np.float32), np.array([[2.0]], dtype=np.float32))

    assert dx.tolist() == [[1.0]]
    assert dw.tolist() == [[6.0]]
    assert db.tolist() == [2.0]


def test_layer_backward_input_gradient_matches_central_differences():
    block = build_model(seed=13, n_layers=2, d=4).blocks[0]
    assert block.activation is Activation.RELU
    x = make_inputs(seed=13, n_items=1, batch_size=2, d=4)[0]
    dy = make_target(seed=13, batch_size=2, d=4)

    dx, _, _ = layer_backward(block, x, dy)

    weight = block.weight.astype(np.float64)
    bias = block.bias.astype(np.float64)
    dy64 = dy.astype(np.float64)

    def objective(inputs):
        return float(np.sum(dy64 * forward64([weight], [bias], [Activation.RELU], inputs)))

    eps = 1e-3
    x64 = x.astype(np.float64)
    for row in range(2):
        for col in range(4):
            up, down = x64.copy(), x64.copy()
            up[row, col] += eps
            down[row, col] -= eps
            numeric = (objective(up) - objective(down)) / (2 * eps)
            assert dx[row, col] == pytest.approx(numeric, rel=1e-3, abs=1e-6)


def test_three_layer_train_step_matches_central_differences():
    model = build_model(seed=13, n_layers=3, d=4)
    x = make_inputs(seed=13, n_items=1, batch_size=2, d=4)[0]
    target = make_target(seed=13, batch_size=2, d=4)

    result = reference_train_step(model, x, target, lr=0.1)

    weights = [block.weight.astype(np.float64) for block in model.blocks]
    biases = [block.bias.astype(np.float64) for block in model.blocks]
    activations = [block.activation for block in model.blocks]
    assert activations == [Activation.RELU, Activation.RELU, Activation.IDENTITY]

    def loss64():
        diff = forward64(weights, biases, activations, x) - target.astype(np.float64)
        return float(np.mean(diff * diff))

    eps = 1e-3
    for layer in range(3):
        dw, db = result.gradients[layer]
        for params, analytic in ((weights[layer], dw), (biases[layer], db)):
            for index in np.ndindex(params.shape):
                original = params[index]
                params[index] = original + eps
                up = loss64()
                params[index] = original - eps
                down = loss64()
                params[index] = original
                numeric = (up - down) / (2 * eps)
                assert analytic[index] == pytest.approx(numeric, rel=1e-3, abs=1e-6), (layer, index)


def test_perfect_fit_has_zero_loss_and_gradients():
    model = build_model(seed=13, n_layers=3, d=4)
    x = make_inputs(seed=13, n_items=1, batch_size=2, d=4)[0]

    result = reference_train_step(model, x, reference_forward(model, x), lr=0.1)

    assert result.loss == 0.0
    for dw, db in result.gradients.values():
        assert not np.any(dw)
        assert not np.any(db)
    for got, want in zip(result.model.blocks, model.blocks):
        assert np.array_equal(got.weight, want.weight)
        assert np.array_equal(got.bias, want.bias)
