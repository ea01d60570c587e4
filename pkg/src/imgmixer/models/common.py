"""Shared functional building blocks for all architecture families."""

from __future__ import annotations

import numpy as np

from ..params import ModelParams
from ..tensor import Tensor, add, gelu, layer_norm, matmul, permute, reshape


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return add(matmul(x, w), b)


def mlp(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    return linear(gelu(linear(x, w1, b1)), w2, b2)


def patch_grid(x: Tensor, patch: int) -> Tensor:
    """(B, H, W, ch) -> (B, H/P, W/P, P*P*ch): non-overlapping patches flattened
    in place, preserving the spatial grid order."""
    b, h, w, ch = x.shape
    t = reshape(x, (b, h // patch, patch, w // patch, patch, ch))
    t = permute(t, (0, 1, 3, 2, 4, 5))
    return reshape(t, (b, h // patch, w // patch, patch * patch * ch))


def patch_grid_inverse(v: Tensor, patch: int, channels: int) -> Tensor:
    """(B, hp, wp, P*P*ch) -> (B, hp*P, wp*P, ch): each patch vector unfolds
    into its own P x P spatial footprint."""
    b, hp, wp, _ = v.shape
    t = reshape(v, (b, hp, wp, patch, patch, channels))
    t = permute(t, (0, 1, 3, 2, 4, 5))
    return reshape(t, (b, hp * patch, wp * patch, channels))


def tokens_from_image(x: Tensor, patch: int) -> Tensor:
    """(B, H, W, ch) -> (B, S, D): flattened-token view, grid structure dropped."""
    v = patch_grid(x, patch)
    b, hp, wp, d = v.shape
    return reshape(v, (b, hp * wp, d))


def image_from_tokens(t: Tensor, height: int, width: int, patch: int, channels: int) -> Tensor:
    """(B, S, D) -> (B, H, W, ch): rows reshaped to patches and reassembled."""
    b = t.shape[0]
    hp, wp = height // patch, width // patch
    v = reshape(t, (b, hp, wp, patch * patch * channels))
    return patch_grid_inverse(v, patch, channels)


def mix_along_axis(
    v: Tensor,
    axis: int,
    params: ModelParams,
    norm_prefix: str,
    mlp_prefix: str,
) -> Tensor:
    """One mixing sub-block: v + MLP(LayerNorm(v)) with both acting along
    ``axis``, weights shared across all fibers of the other axes."""
    t = layer_norm(v, axis, params[norm_prefix + ".g"], params[norm_prefix + ".b"])
    last = v.ndim - 1
    if axis != last:
        order = tuple(i for i in range(v.ndim) if i != axis) + (axis,)
        inverse = tuple(int(i) for i in np.argsort(order))
        t = permute(t, order)
    t = mlp(
        t,
        params[mlp_prefix + ".w1"],
        params[mlp_prefix + ".b1"],
        params[mlp_prefix + ".w2"],
        params[mlp_prefix + ".b2"],
    )
    if axis != last:
        t = permute(t, inverse)
    return add(v, t)
