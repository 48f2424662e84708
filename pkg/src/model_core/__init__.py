from src.model_core.blocks import (
    Activation,
    LayerBlock,
    LayeredModel,
    ModelConfig,
    Tensor,
    as_tensor,
    build_model,
    make_inputs,
    make_target,
)
from src.model_core.ops import (
    TrainStepResult,
    layer_backward,
    layer_forward,
    mse_loss,
    reference_forward,
    reference_train_step,
    sgd_update,
)

__all__ = [
    "Activation",
    "LayerBlock",
    "LayeredModel",
    "ModelConfig",
    "Tensor",
    "TrainStepResult",
    "as_tensor",
    "build_model",
    "layer_backward",
    "layer_forward",
    "make_inputs",
    "make_target",
    "mse_loss",
    "reference_forward",
    "reference_train_step",
    "sgd_update",
]
