"""First-order optimizers operating on ModelParams."""

from __future__ import annotations

import numpy as np

from .params import ModelParams


class Sgd:
    """Plain gradient descent: theta <- theta - lr * g."""

    kind = "sgd"

    def __init__(self, lr: float):
        if lr < 0:
            raise ValueError(f"learning rate must be non-negative, got {lr}")
        self.lr = float(lr)
        self.t = 0

    def step(self, params: ModelParams) -> None:
        grads = _collect_grads(params)
        self.t += 1
        for name, p in params.items():
            p.data -= self.lr * grads[name]


class Adam:
    """Adam with standard bias correction; moments match parameter shapes."""

    kind = "adam"

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0:
            raise ValueError(f"learning rate must be non-negative, got {lr}")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: ModelParams) -> None:
        grads = _collect_grads(params)
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self._m.setdefault(name, np.zeros_like(p.data))
            v = self._v.setdefault(name, np.zeros_like(p.data))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _collect_grads(params: ModelParams) -> dict[str, np.ndarray]:
    grads = {}
    for name, p in params.items():
        if p.grad is None:
            raise ValueError(f"missing gradient for parameter '{name}'; run backward first")
        grads[name] = p.grad
    return grads


def make_optimizer(kind: str, lr: float) -> Sgd | Adam:
    if kind == "sgd":
        return Sgd(lr)
    if kind == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer kind '{kind}' (expected 'sgd' or 'adam')")
