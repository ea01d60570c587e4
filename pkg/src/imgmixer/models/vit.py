"""Vision-transformer baseline adapted for image reconstruction.

No classification token; a reconstruction head (shared layer norm + linear)
maps each output sequence element back to its image patch.
"""

from __future__ import annotations

import numpy as np

from ..params import ModelParams
from ..tensor import Tensor, add, layer_norm, matmul, permute, reshape, scale, softmax
from .common import image_from_tokens, linear, mlp, tokens_from_image
from .config import ModelConfig


def attention(
    x: Tensor, params: ModelParams, prefix: str, heads: int, return_weights: bool = False
):
    """Multi-head self-attention over the token axis."""
    b, s, c = x.shape
    dh = c // heads

    def project(tag: str) -> Tensor:
        t = linear(x, params[f"{prefix}attn.w{tag}"], params[f"{prefix}attn.b{tag}"])
        return permute(reshape(t, (b, s, heads, dh)), (0, 2, 1, 3))

    q, k, v = project("q"), project("k"), project("v")
    scores = scale(matmul(q, permute(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dh))
    weights = softmax(scores, axis=-1)
    out = matmul(weights, v)
    out = reshape(permute(out, (0, 2, 1, 3)), (b, s, c))
    out = linear(out, params[f"{prefix}attn.wo"], params[f"{prefix}attn.bo"])
    if return_weights:
        return out, weights
    return out


def vit_block(x: Tensor, params: ModelParams, prefix: str, heads: int) -> Tensor:
    t = layer_norm(x, 2, params[prefix + "norm1.g"], params[prefix + "norm1.b"])
    x = add(x, attention(t, params, prefix, heads))
    t = layer_norm(x, 2, params[prefix + "norm2.g"], params[prefix + "norm2.b"])
    t = mlp(
        t,
        params[prefix + "mlp.w1"],
        params[prefix + "mlp.b1"],
        params[prefix + "mlp.w2"],
        params[prefix + "mlp.b2"],
    )
    return add(x, t)


def vit_forward(x: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    t = tokens_from_image(x, cfg.patch)
    t = linear(t, params["embed.w"], params["embed.b"])
    t = add(t, params["pos"])
    for i in range(cfg.depth):
        t = vit_block(t, params, f"block{i:02d}.", cfg.heads)
    t = layer_norm(t, 2, params["head.norm.g"], params["head.norm.b"])
    t = linear(t, params["head.w"], params["head.b"])
    return image_from_tokens(t, cfg.height, cfg.width, cfg.patch, cfg.channels)
