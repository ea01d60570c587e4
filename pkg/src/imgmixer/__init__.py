"""Image reconstruction with image-to-image MLP-mixers on a small autodiff core."""

from .tensor import (
    NumericalError,
    ShapeError,
    Tensor,
    backward,
    gelu,
    layer_norm,
    matmul,
    mse_loss,
    no_grad,
    softmax,
)
from .params import ModelParams
from .models import Model, ModelConfig, count_params, forward, init_params
from .metrics import psnr, ssim

__version__ = "0.1.0"

__all__ = [
    "Model",
    "ModelConfig",
    "ModelParams",
    "NumericalError",
    "ShapeError",
    "Tensor",
    "backward",
    "count_params",
    "forward",
    "gelu",
    "init_params",
    "layer_norm",
    "matmul",
    "mse_loss",
    "no_grad",
    "psnr",
    "softmax",
    "ssim",
    "__version__",
]
