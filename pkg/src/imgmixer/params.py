"""Named, ordered collections of trainable tensors."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor


class ModelParams:
    """Insertion-ordered mapping from parameter name to trainable Tensor.

    The order is the canonical order: checkpoints are written and gradients
    are checked in exactly this sequence.
    """

    def __init__(self, tensors: dict[str, Tensor] | None = None):
        self._tensors: dict[str, Tensor] = {}
        if tensors:
            for name, t in tensors.items():
                self[name] = t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __setitem__(self, name: str, t: Tensor) -> None:
        if not isinstance(t, Tensor):
            raise TypeError(f"parameter '{name}' must be a Tensor")
        self._tensors[name] = t

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def values(self):
        return self._tensors.values()

    def count(self) -> int:
        """Total number of trainable scalars."""
        return sum(t.size for t in self._tensors.values())

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def copy(self) -> "ModelParams":
        out = ModelParams()
        for name, t in self._tensors.items():
            out[name] = Tensor(t.data.copy(), requires_grad=t.requires_grad)
        return out

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._tensors.items()}
