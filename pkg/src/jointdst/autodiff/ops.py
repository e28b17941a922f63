"""Differentiable operations.

Every function takes and returns `Tensor` objects.  When a tape is active
and any input requires a gradient, the operation records a closure that
maps the gradient of its output to gradients of its inputs.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from ..exceptions import ShapeError
from .tensor import Array, BackwardFn, Tensor, current_tape

__all__ = [
    "add",
    "bce_with_logits",
    "concat",
    "cross_entropy",
    "detach",
    "embedding",
    "linear",
    "log_softmax",
    "mean",
    "mul",
    "one_minus",
    "relu",
    "reshape",
    "row",
    "scale",
    "sigmoid",
    "slice_last",
    "softmax",
    "stack",
    "sub",
    "tanh",
    "total",
]


def _finish(
    op: str,
    inputs: tuple[Tensor, ...],
    data: Array,
    backward: BackwardFn,
) -> Tensor:
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires_grad)
    if requires_grad:
        tape = current_tape()
        if tape is not None:
            tape.record(op, inputs, out, backward)
    return out


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


def detach(a: Tensor) -> Tensor:
    """Return the values of ``a`` cut off from the gradient flow."""
    return Tensor(a.data)


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return _finish("add", (a, b), a.data + b.data, lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return _finish("sub", (a, b), a.data - b.data, lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    return _finish(
        "mul", (a, b), a.data * b.data, lambda g: (g * b.data, g * a.data)
    )


def scale(a: Tensor, factor: float) -> Tensor:
    return _finish("scale", (a,), a.data * factor, lambda g: (g * factor,))


def one_minus(a: Tensor) -> Tensor:
    return _finish("one_minus", (a,), 1.0 - a.data, lambda g: (-g,))


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _finish("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _finish("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def relu(a: Tensor) -> Tensor:
    active = a.data > 0
    out = np.where(active, a.data, 0.0).astype(a.dtype)
    return _finish("relu", (a,), out, lambda g: (g * active,))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map ``weight @ x + bias``.

    ``weight`` has shape (out, in).  ``x`` is either a vector of length
    ``in`` or a matrix with one input per row, in which case the result has
    one output per row.
    """
    if weight.data.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ShapeError("linear", x.shape, weight.shape)
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError("linear", weight.shape, bias.shape)
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g: Array) -> tuple[Array | None, ...]:
        grad_x = g @ weight.data
        if x.data.ndim == 1:
            grad_w = np.outer(g, x.data)
            grad_b = g
        else:
            grad_w = g.T @ x.data
            grad_b = g.sum(axis=0)
        if bias is None:
            return grad_x, grad_w
        return grad_x, grad_w, grad_b

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _finish("linear", inputs, out, backward)


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    if not tensors:
        raise ShapeError("concat", (), ())
    first = tensors[0]
    for other in tensors[1:]:
        if other.shape[:-1] != first.shape[:-1]:
            raise ShapeError("concat", first.shape, other.shape)
    sizes = [t.shape[-1] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=-1)

    def backward(g: Array) -> list[Array | None]:
        return list(np.split(g, bounds, axis=-1))

    return _finish("concat", tuple(tensors), out, backward)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equally-shaped tensors along a new first axis."""
    if not tensors:
        raise ShapeError("stack", (), ())
    for other in tensors[1:]:
        _same_shape("stack", tensors[0], other)
    out = np.stack([t.data for t in tensors])
    return _finish("stack", tuple(tensors), out, lambda g: list(g))


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    """Select ``a[..., start:stop]``."""
    if not 0 <= start < stop <= a.shape[-1]:
        raise ShapeError("slice_last", a.shape, (start, stop))
    out = a.data[..., start:stop]

    def backward(g: Array) -> tuple[Array]:
        grad = np.zeros_like(a.data)
        grad[..., start:stop] = g
        return (grad,)

    return _finish("slice_last", (a,), out, backward)


def reshape(a: Tensor, *shape: int) -> Tensor:
    """Return the same values with a new shape of equal size."""
    if int(np.prod(shape)) != a.size:
        raise ShapeError("reshape", a.shape, shape)
    out = a.data.reshape(shape)
    return _finish("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def row(a: Tensor, index: int) -> Tensor:
    """Select one row of a matrix."""
    if a.data.ndim != 2 or not -a.shape[0] <= index < a.shape[0]:
        raise ShapeError("row", a.shape, (index,))

    def backward(g: Array) -> tuple[Array]:
        grad = np.zeros_like(a.data)
        grad[index] = g
        return (grad,)

    return _finish("row", (a,), a.data[index], backward)


def embedding(table: Tensor, ids: npt.ArrayLike) -> Tensor:
    """Look up one row of ``table`` per id."""
    index = np.asarray(ids, dtype=np.int64)
    if table.data.ndim != 2 or index.ndim != 1:
        raise ShapeError("embedding", table.shape, index.shape)
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise ShapeError("embedding", table.shape, (int(index.max()),))

    def backward(g: Array) -> tuple[Array]:
        grad = np.zeros_like(table.data)
        np.add.at(grad, index, g)
        return (grad,)

    return _finish("embedding", (table,), table.data[index], backward)


def mean(tensors: Sequence[Tensor]) -> Tensor:
    """Elementwise mean over a non-empty set of equally-shaped tensors."""
    if not tensors:
        raise ShapeError("mean", (), ())
    for other in tensors[1:]:
        _same_shape("mean", tensors[0], other)
    count = len(tensors)
    out = sum(t.data for t in tensors[1:]) + tensors[0].data
    out = out / count
    return _finish(
        "mean", tuple(tensors), out, lambda g: [g / count] * count
    )


def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a scalar tensor."""
    out = np.asarray(a.data.sum(), dtype=a.dtype)
    return _finish(
        "total", (a,), out, lambda g: (np.full_like(a.data, g.item()),)
    )


def _softmax(values: Array) -> Array:
    shifted = values - values.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    out = _softmax(a.data)

    def backward(g: Array) -> tuple[Array]:
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _finish("softmax", (a,), out, backward)


def log_softmax(a: Tensor) -> Tensor:
    """Log of the softmax over the last axis, computed stably."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def backward(g: Array) -> tuple[Array]:
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return _finish("log_softmax", (a,), out, backward)


def cross_entropy(
    logits: Tensor,
    targets: npt.ArrayLike,
    weights: npt.ArrayLike | None = None,
) -> Tensor:
    """Summed softmax cross entropy.

    Parameters
    ----------
    logits
        A vector of class logits, or a matrix with one row per example.
    targets
        Gold class index (or one index per row).
    weights
        Optional per-row weights; rows with weight 0 do not contribute.
    """
    matrix = logits.data.reshape(-1, logits.shape[-1])
    target = np.asarray(targets, dtype=np.int64).reshape(-1)
    if target.shape[0] != matrix.shape[0]:
        raise ShapeError("cross_entropy", logits.shape, target.shape)
    weight = (
        np.ones(target.shape[0], dtype=logits.dtype)
        if weights is None
        else np.asarray(weights, dtype=logits.dtype).reshape(-1)
    )
    shifted = matrix - matrix.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1))
    rows = np.arange(target.shape[0])
    losses = log_norm - shifted[rows, target]
    out = np.asarray((losses * weight).sum(), dtype=logits.dtype)

    def backward(g: Array) -> tuple[Array]:
        grad = _softmax(matrix)
        grad[rows, target] -= 1.0
        grad *= weight[:, None] * g.item()
        return (grad.reshape(logits.shape),)

    return _finish("cross_entropy", (logits,), out, backward)


def bce_with_logits(logits: Tensor, targets: npt.ArrayLike) -> Tensor:
    """Summed sigmoid cross entropy against 0/1 targets."""
    target = np.asarray(targets, dtype=logits.dtype)
    if target.shape != logits.shape:
        raise ShapeError("bce_with_logits", logits.shape, target.shape)
    x = logits.data
    losses = np.maximum(x, 0.0) - x * target + np.log1p(np.exp(-np.abs(x)))
    out = np.asarray(losses.sum(), dtype=logits.dtype)

    def backward(g: Array) -> tuple[Array]:
        probs = 0.5 * (1.0 + np.tanh(0.5 * x))
        return ((probs - target) * g.item(),)

    return _finish("bce_with_logits", (logits,), out, backward)
