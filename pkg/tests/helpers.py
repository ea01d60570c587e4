"""Shared gradient-check programs: one scalar program per differentiable op.

Each builder returns (fn, params) suitable for grad_check. Random weighting
tensors make the upstream gradients non-uniform so sloppy backward rules
cannot hide behind symmetric inputs.
"""

import numpy as np

from imgmixer.metrics import one_minus_ssim_loss
from imgmixer.params import ModelParams
from imgmixer.tensor import (
    Tensor,
    add,
    div,
    gelu,
    layer_norm,
    matmul,
    mse_loss,
    mul,
    neg,
    permute,
    reshape,
    scale,
    softmax,
    sub,
    tmean,
    tsum,
)

# Central differences are exact (up to roundoff) for linear and quadratic
# programs, so those get the tight tolerance.
LINEAR_TOL = 1e-6
NONLINEAR_TOL = 1e-4


def _leaf(rng, shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def _const(rng, shape, scale_=1.0):
    return Tensor(rng.normal(scale=scale_, size=shape))


def _weighted(t, weights):
    return tsum(mul(t, weights))


def prog_matmul(rng):
    params = ModelParams({"a": _leaf(rng, (4, 5)), "b": _leaf(rng, (5, 3))})
    w = _const(rng, (4, 3))
    return lambda p: _weighted(matmul(p["a"], p["b"]), w), params, LINEAR_TOL


def prog_matmul_batched(rng):
    params = ModelParams({"a": _leaf(rng, (2, 3, 4)), "b": _leaf(rng, (4, 5))})
    w = _const(rng, (2, 3, 5))
    return lambda p: _weighted(matmul(p["a"], p["b"]), w), params, LINEAR_TOL


def prog_add_broadcast(rng):
    params = ModelParams({"a": _leaf(rng, (4, 3)), "b": _leaf(rng, (3,))})
    w = _const(rng, (4, 3))
    return lambda p: _weighted(add(p["a"], p["b"]), w), params, LINEAR_TOL


def prog_sub(rng):
    params = ModelParams({"a": _leaf(rng, (4, 3)), "b": _leaf(rng, (4, 3))})
    w = _const(rng, (4, 3))
    return lambda p: _weighted(sub(p["a"], p["b"]), w), params, LINEAR_TOL


def prog_mul_broadcast(rng):
    params = ModelParams({"a": _leaf(rng, (4, 3)), "b": _leaf(rng, (3,))})
    w = _const(rng, (4, 3))
    return lambda p: _weighted(mul(p["a"], p["b"]), w), params, NONLINEAR_TOL


def prog_div(rng):
    a = _leaf(rng, (4, 3))
    b = Tensor(rng.uniform(0.5, 2.0, size=(4, 3)), requires_grad=True)
    params = ModelParams({"a": a, "b": b})
    w = _const(rng, (4, 3))
    return lambda p: _weighted(div(p["a"], p["b"]), w), params, NONLINEAR_TOL


def prog_scale_neg(rng):
    params = ModelParams({"a": _leaf(rng, (5,))})
    w = _const(rng, (5,))
    return lambda p: _weighted(neg(scale(p["a"], 2.5)), w), params, LINEAR_TOL


def prog_reshape_permute(rng):
    params = ModelParams({"x": _leaf(rng, (2, 3, 4))})
    w = _const(rng, (4, 6))
    return (
        lambda p: _weighted(reshape(permute(p["x"], (2, 0, 1)), (4, 6)), w),
        params,
        LINEAR_TOL,
    )


def prog_gelu(rng):
    params = ModelParams({"x": _leaf(rng, (4, 5))})
    w = _const(rng, (4, 5))
    return lambda p: _weighted(gelu(p["x"]), w), params, NONLINEAR_TOL


def prog_layer_norm(rng):
    params = ModelParams(
        {
            "x": _leaf(rng, (4, 8)),
            "g": Tensor(rng.uniform(0.5, 1.5, size=8), requires_grad=True),
            "b": _leaf(rng, (8,)),
        }
    )
    w = _const(rng, (4, 8))
    return (
        lambda p: _weighted(layer_norm(p["x"], 1, p["g"], p["b"]), w),
        params,
        NONLINEAR_TOL,
    )


def prog_layer_norm_middle_axis(rng):
    params = ModelParams(
        {
            "x": _leaf(rng, (2, 5, 3)),
            "g": Tensor(rng.uniform(0.5, 1.5, size=5), requires_grad=True),
            "b": _leaf(rng, (5,)),
        }
    )
    w = _const(rng, (2, 5, 3))
    return (
        lambda p: _weighted(layer_norm(p["x"], 1, p["g"], p["b"]), w),
        params,
        NONLINEAR_TOL,
    )


def prog_softmax(rng):
    params = ModelParams({"x": _leaf(rng, (4, 6))})
    w = _const(rng, (4, 6))
    return lambda p: _weighted(softmax(p["x"], axis=1), w), params, NONLINEAR_TOL


def prog_mse(rng):
    params = ModelParams({"pred": _leaf(rng, (4, 5))})
    target = _const(rng, (4, 5))
    return lambda p: mse_loss(p["pred"], target), params, NONLINEAR_TOL


def prog_reductions(rng):
    params = ModelParams({"x": _leaf(rng, (3, 4, 5))})
    w = _const(rng, (3, 5))
    return (
        lambda p: _weighted(tmean(p["x"], axis=1), w),
        params,
        LINEAR_TOL,
    )


def prog_ssim_loss(rng):
    clean = Tensor(rng.uniform(0.0, 1.0, size=(1, 16, 16, 1)))
    params = ModelParams(
        {"img": Tensor(rng.uniform(0.0, 1.0, size=(1, 16, 16, 1)), requires_grad=True)}
    )
    return lambda p: one_minus_ssim_loss(p["img"], clean), params, 1e-3


OP_PROGRAMS = {
    "matmul": prog_matmul,
    "matmul_batched": prog_matmul_batched,
    "add_broadcast": prog_add_broadcast,
    "sub": prog_sub,
    "mul_broadcast": prog_mul_broadcast,
    "div": prog_div,
    "scale_neg": prog_scale_neg,
    "reshape_permute": prog_reshape_permute,
    "gelu": prog_gelu,
    "layer_norm": prog_layer_norm,
    "layer_norm_middle_axis": prog_layer_norm_middle_axis,
    "softmax": prog_softmax,
    "mse_loss": prog_mse,
    "reductions": prog_reductions,
    "ssim_loss": prog_ssim_loss,
}

TINY_FAMILY_CONFIGS = dict(
    height=16, width=16, channels=1, patch=4, depth=2, embed=8, factor=2, heads=4, levels=1
)
