"""Image-to-image mixer, its linear-layer ablation, and the multi-resolution variant.

The main forward keeps patches on their spatial grid: embed to a
(H/P, W/P, C) volume, mix along height, width, and channel axes in turn,
then expand the volume back to pixel space.
"""

from __future__ import annotations

from ..params import ModelParams
from ..tensor import Tensor, add, gelu, layer_norm, permute, reshape
from .common import linear, mix_along_axis, patch_grid, patch_grid_inverse
from .config import ModelConfig


def patch_embed(x: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    """(B, H, W, ch) -> (B, H/P, W/P, C) with one shared linear map per patch."""
    return linear(patch_grid(x, cfg.patch), params["embed.w"], params["embed.b"])


def patch_expand(v: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    """(B, H/P, W/P, C) -> (B, H, W, ch): per-patch lift C -> C*P^2, spatial
    unfold, then a shared per-pixel projection down to image channels."""
    t = linear(v, params["expand.w"], params["expand.b"])
    t = patch_grid_inverse(t, cfg.patch, cfg.embed)
    return linear(t, params["combine.w"], params["combine.b"])


def mixer_block(v: Tensor, params: ModelParams, prefix: str = "block00.") -> Tensor:
    """Height-mix, width-mix, channel-mix in sequence; shape preserving."""
    v = mix_along_axis(v, 1, params, prefix + "hnorm", prefix + "hmix")
    v = mix_along_axis(v, 2, params, prefix + "wnorm", prefix + "wmix")
    v = mix_along_axis(v, 3, params, prefix + "cnorm", prefix + "cmix")
    return v


def img2img_forward(x: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    v = patch_embed(x, params, cfg)
    for i in range(cfg.depth):
        v = mixer_block(v, params, f"block{i:02d}.")
    return patch_expand(v, params, cfg)


def _linear_along_axis(v: Tensor, axis: int, w: Tensor, b: Tensor) -> Tensor:
    last = v.ndim - 1
    if axis == last:
        return linear(v, w, b)
    order = tuple(i for i in range(v.ndim) if i != axis) + (axis,)
    inverse = tuple(sorted(range(v.ndim), key=lambda i: order[i]))
    return permute(linear(permute(v, order), w, b), inverse)


def linear_mixer_block(v: Tensor, params: ModelParams, prefix: str = "block00.") -> Tensor:
    """Single-norm variant: linear height mix, linear width mix, channel
    linear -> GeLU -> channel linear, one skip around the whole block."""
    t = layer_norm(v, 3, params[prefix + "norm.g"], params[prefix + "norm.b"])
    t = _linear_along_axis(t, 1, params[prefix + "hlin.w"], params[prefix + "hlin.b"])
    t = _linear_along_axis(t, 2, params[prefix + "wlin.w"], params[prefix + "wlin.b"])
    t = linear(t, params[prefix + "clin1.w"], params[prefix + "clin1.b"])
    t = gelu(t)
    t = linear(t, params[prefix + "clin2.w"], params[prefix + "clin2.b"])
    return add(v, t)


def linear_mixer_forward(x: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    v = patch_embed(x, params, cfg)
    for i in range(cfg.depth):
        v = linear_mixer_block(v, params, f"block{i:02d}.")
    return patch_expand(v, params, cfg)


def multires_merge(v: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """(B, h, w, C) -> (B, h/2, w/2, 2C): each 2x2 neighborhood's 4C values
    mapped by one shared linear layer."""
    bsz, h, wd, c = v.shape
    if h % 2 or wd % 2:
        raise ValueError(f"merge needs even spatial dims, got {h}x{wd}")
    t = reshape(v, (bsz, h // 2, 2, wd // 2, 2, c))
    t = permute(t, (0, 1, 3, 2, 4, 5))
    t = reshape(t, (bsz, h // 2, wd // 2, 4 * c))
    return linear(t, w, b)


def multires_expand(v: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """(B, h, w, 2C) -> (B, 2h, 2w, C): linear lift 2C -> 4C, then unfold to 2x2."""
    bsz, h, wd, c2 = v.shape
    t = linear(v, w, b)
    c = c2 // 2
    t = reshape(t, (bsz, h, wd, 2, 2, c))
    t = permute(t, (0, 1, 3, 2, 4, 5))
    return reshape(t, (bsz, 2 * h, 2 * wd, c))


def multires_forward(x: Tensor, params: ModelParams, cfg: ModelConfig) -> Tensor:
    per_scale = cfg.depth // (cfg.levels + 1)
    v = patch_embed(x, params, cfg)
    for level in range(cfg.levels + 1):
        for j in range(per_scale):
            v = mixer_block(v, params, f"scale{level}.block{j:02d}.")
        if level < cfg.levels:
            v = multires_merge(v, params[f"down{level}.w"], params[f"down{level}.b"])
    for level in range(cfg.levels - 1, -1, -1):
        v = multires_expand(v, params[f"up{level}.w"], params[f"up{level}.b"])
    return patch_expand(v, params, cfg)
