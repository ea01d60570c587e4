"""Dense tensors with reverse-mode automatic differentiation.

Every operation that touches a tensor requiring gradients records itself on
an implicit per-pass tape (the graph of parent links plus backward closures).
``backward`` replays that tape once in reverse topological order and then
discards it; a fresh forward pass builds a fresh tape.

Tensors are immutable after creation except for their ``grad`` buffer and
the sanctioned in-place parameter update performed by optimizers between
passes. A tape must not be shared across threads; independent model
instances can run in parallel.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

DEFAULT_DTYPE = np.float64

# Set to True to assert that every forward op produces finite values.
CHECK_FINITE = False

_INV_SQRT2 = float(1.0 / np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class ShapeError(ValueError):
    """Operand shapes violate an operation's contract."""


class NumericalError(ArithmeticError):
    """A numerical invariant failed (non-finite values, divergence)."""


_tls = threading.local()


def grad_enabled() -> bool:
    return getattr(_tls, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / finite differences)."""
    prev = grad_enabled()
    _tls.grad_enabled = False
    try:
        yield
    finally:
        _tls.grad_enabled = prev


class Tensor:
    """Rank-N real array, optionally participating in the gradient tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            raise TypeError("wrap raw array data, not another Tensor")
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
                dtype = data.dtype
            else:
                dtype = DEFAULT_DTYPE
        self.data = np.asarray(data, dtype=dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._consumed = False

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        """The underlying array. Treat as read-only."""
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}{flag})"

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub_from_scalar(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return permute(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def zeros(shape, dtype=None) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype or DEFAULT_DTYPE))


# -- tape machinery ------------------------------------------------------------


class Tape:
    """Topologically ordered record of the nodes reaching one output.

    Built on demand from parent links; every node's inputs precede it, so a
    single reverse sweep visits each node exactly once.
    """

    __slots__ = ("nodes",)

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "Tape":
        nodes: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                nodes.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return cls(nodes)


def _accum(t: Tensor, g: np.ndarray) -> None:
    # Copy on first write: g may alias another node's buffer or be a
    # read-only broadcast view, and accumulation must own its storage.
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


def _make(out_data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    if CHECK_FINITE and not np.all(np.isfinite(out_data)):
        raise NumericalError("forward op produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out._consumed = False
    recording = grad_enabled() and any(p.requires_grad for p in parents)
    if recording:
        out.requires_grad = True
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def backward(loss: Tensor) -> None:
    """Populate gradients of every reachable leaf with requires_grad.

    Gradients accumulate: a leaf appearing k times in the graph receives the
    sum of all k contributions. The tape is discarded afterwards; calling
    backward twice on the same output raises.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise RuntimeError("backward already called on this graph; rebuild the forward pass")
    tape = Tape.trace(loss)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    for node in tape.nodes:
        node._backward = None
        node._parents = ()
    loss._consumed = True


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over broadcast dimensions back to the operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a_shape, b_shape, op_name: str) -> None:
    try:
        np.broadcast_shapes(a_shape, b_shape)
    except ValueError:
        raise ShapeError(f"{op_name}: shapes {a_shape} and {b_shape} do not broadcast") from None


# -- elementwise ops -------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out_data = a.data + s

        def bw(g):
            if a.requires_grad:
                _accum(a, g)

        return _make(out_data, (a,), bw)

    _check_broadcast(a.shape, b.shape, "add")
    out_data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), bw)


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out_data = a.data - s

        def bw(g):
            if a.requires_grad:
                _accum(a, g)

        return _make(out_data, (a,), bw)

    _check_broadcast(a.shape, b.shape, "sub")
    out_data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), bw)


def sub_from_scalar(s, b: Tensor) -> Tensor:
    s = float(s)
    out_data = s - b.data

    def bw(g):
        if b.requires_grad:
            _accum(b, -g)

    return _make(out_data, (b,), bw)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return scale(a, b)
    _check_broadcast(a.shape, b.shape, "mul")
    out_data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), bw)


def scale(a: Tensor, s) -> Tensor:
    s = float(s)
    out_data = a.data * s

    def bw(g):
        if a.requires_grad:
            _accum(a, g * s)

    return _make(out_data, (a,), bw)


def div(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out_data = a.data / s

        def bw(g):
            if a.requires_grad:
                _accum(a, g / s)

        return _make(out_data, (a,), bw)

    _check_broadcast(a.shape, b.shape, "div")
    out_data = a.data / b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(out_data, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    out_data = -a.data

    def bw(g):
        if a.requires_grad:
            _accum(a, -g)

    return _make(out_data, (a,), bw)


# -- structural ops -------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading dimensions broadcast (batched form)."""
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    _check_broadcast(a.shape[:-2], b.shape[:-2], "matmul")
    out_data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return _make(out_data, (a, b), bw)


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise ShapeError(f"reshape from {x.shape} to {shape} changes element count")
    out_data = x.data.reshape(shape)

    def bw(g):
        if x.requires_grad:
            _accum(x, g.reshape(x.data.shape))

    return _make(out_data, (x,), bw)


def permute(x: Tensor, axes) -> Tensor:
    axes = tuple(int(a) for a in axes)
    if sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"invalid permutation {axes} for rank-{x.ndim} tensor")
    out_data = np.ascontiguousarray(np.transpose(x.data, axes))
    inverse = tuple(np.argsort(axes))

    def bw(g):
        if x.requires_grad:
            _accum(x, np.ascontiguousarray(np.transpose(g, inverse)))

    return _make(out_data, (x,), bw)


# -- nonlinearities and normalization ---------------------------------------------


def gelu(x: Tensor) -> Tensor:
    """x * Phi(x) with the exact standard-normal CDF (erf form)."""
    phi = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out_data = x.data * phi

    def bw(g):
        if x.requires_grad:
            density = np.exp(-0.5 * x.data * x.data) * _INV_SQRT_2PI
            _accum(x, g * (phi + x.data * density))

    return _make(out_data, (x,), bw)


def layer_norm(x: Tensor, axis: int, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Zero-mean unit-variance normalization along one axis, then affine gain/bias."""
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"layer_norm axis {axis} out of range for shape {x.shape}")
    axis = axis % x.ndim
    length = x.shape[axis]
    if gain.shape != (length,) or bias.shape != (length,):
        raise ShapeError(
            f"layer_norm gain/bias must have shape ({length},), got {gain.shape} and {bias.shape}"
        )
    mu = x.data.mean(axis=axis, keepdims=True)
    centered = x.data - mu
    var = np.mean(centered * centered, axis=axis, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    bshape = [1] * x.ndim
    bshape[axis] = length
    out_data = xhat * gain.data.reshape(bshape) + bias.data.reshape(bshape)
    reduce_axes = tuple(i for i in range(x.ndim) if i != axis)

    def bw(g):
        if x.requires_grad:
            dxhat = g * gain.data.reshape(bshape)
            m1 = dxhat.mean(axis=axis, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=axis, keepdims=True)
            _accum(x, (dxhat - m1 - xhat * m2) * inv_std)
        if gain.requires_grad:
            _accum(gain, (g * xhat).sum(axis=reduce_axes))
        if bias.requires_grad:
            _accum(bias, g.sum(axis=reduce_axes))

    return _make(out_data, (x, gain, bias), bw)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-subtracted softmax along one axis; slices sum to 1."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        if x.requires_grad:
            inner = (g * s).sum(axis=axis, keepdims=True)
            _accum(x, s * (g - inner))

    return _make(s, (x,), bw)


# -- reductions and losses --------------------------------------------------------


def tsum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if x.requires_grad:
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            _accum(x, np.broadcast_to(gg, x.data.shape))

    return _make(out_data, (x,), bw)


def tmean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out_data = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.size if axis is None else x.shape[axis]

    def bw(g):
        if x.requires_grad:
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            _accum(x, np.broadcast_to(gg, x.data.shape) / count)

    return _make(out_data, (x,), bw)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all elements of half the squared difference."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shapes differ: {pred.shape} vs {target.shape}")
    d = sub(pred, target)
    return scale(tmean(mul(d, d)), 0.5)


def sum_squared_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Half the summed squared difference (the per-sample objective, unaveraged)."""
    if pred.shape != target.shape:
        raise ShapeError(f"sum_squared_loss shapes differ: {pred.shape} vs {target.shape}")
    d = sub(pred, target)
    return scale(tsum(mul(d, d)), 0.5)
