"""Central-finite-difference validation of tape gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ModelParams
from .rng import substream
from .tensor import ShapeError, Tensor, backward, no_grad


def grad_check(
    fn: Callable[[ModelParams], Tensor],
    params: ModelParams,
    h: float = 1e-5,
    coords_per_tensor: int = 64,
    seed: int = 0,
) -> float:
    """Compare tape gradients of a scalar program against central differences.

    For each parameter tensor, up to ``coords_per_tensor`` randomly chosen
    coordinates are perturbed by +/- h and the two-sided difference quotient
    is compared with the analytic gradient. Returns the maximum relative
    error over all sampled coordinates, with the denominator floored at 1 so
    that near-zero gradients are judged by absolute error.

    Run in f64; finite differences have no headroom at f32.
    """
    loss = fn(params)
    if loss.data.size != 1:
        raise ShapeError(f"grad_check needs a scalar program, got output shape {loss.shape}")
    params.zero_grad()
    backward(loss)
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }
    params.zero_grad()

    rng = substream(seed, "grad-check")
    worst = 0.0
    with no_grad():
        for name, p in params.items():
            flat = p.data.reshape(-1)
            n = flat.size
            if n <= coords_per_tensor:
                coords = np.arange(n)
            else:
                coords = rng.choice(n, size=coords_per_tensor, replace=False)
            ana_flat = analytic[name].reshape(-1)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + h
                up = fn(params).item()
                flat[i] = orig - h
                down = fn(params).item()
                flat[i] = orig
                fd = (up - down) / (2.0 * h)
                err = abs(fd - ana_flat[i]) / max(abs(fd), abs(ana_flat[i]), 1.0)
                if err > worst:
                    worst = err
    return worst
