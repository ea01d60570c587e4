"""Baseline adaptation of the original all-MLP mixer for reconstruction.

Patches become rows of a flat (S, C) token table, so the spatial grid is
discarded. The classifier tail is replaced by a projection back to patch
vectors which are unflattened into the output image.
"""

from __future__ import annotations

from ..params import ModelParams
from ..tensor import Tensor, add, layer_norm, permute
from .common import image_from_tokens, linear, mlp, tokens_from_image
from .config import ModelConfig


def original_block(t: Tensor, params: ModelParams, prefix: str = "block00.") -> Tensor:
    """Token mixing over S then channel mixing over C, pre-norm + skip each."""
    u = layer_norm(t, 2, params[prefix + "tnorm.g"], params[prefix + "tnorm.b"])
    u = permute(u, (0, 2, 1))
    u = mlp(
        u,
        params[prefix + "tmix.w1"],
        params[prefix + "tmix.b1"],
        params[prefix + "tmix.w2"],
        params[prefix + "tmix.b2"],
    )
    t = add(t, permute(u, (0, 2, 1)))
    u = layer_norm(t, 2, params[prefix + "cnorm.g"], params[prefix + "cnorm.b"])
    u = mlp(
        u,
        params[prefix + "cmix.w1"],
        params[prefix + "cmix.b1"],
        params[prefix + "cmix.w2"],
        params[prefix + "cmix.b2"],
    )
    return add(t, u)


def original_forward(x: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    t = tokens_from_image(x, cfg.patch)
    t = linear(t, params["embed.w"], params["embed.b"])
    for i in range(cfg.depth):
        t = original_block(t, params, f"block{i:02d}.")
    t = linear(t, params["proj.w"], params["proj.b"])
    return image_from_tokens(t, cfg.height, cfg.width, cfg.patch, cfg.channels)
