"""Tensors, trainable parameters and the tape used for reverse-mode
differentiation.

Operations in `jointdst.autodiff.ops` record themselves on the tape that is
active in the current context (see `Tape.__enter__`).  Outside of a tape
they only compute values, which is how inference runs.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Iterator, Sequence
from contextvars import ContextVar, Token
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from ..exceptions import ShapeError

__all__ = [
    "Parameter",
    "ParameterSet",
    "Tape",
    "TapeEntry",
    "Tensor",
    "backward",
    "current_tape",
]

Array = npt.NDArray[np.floating[Any]]
BackwardFn = Callable[[Array], Sequence[Array | None]]

_active_tape: ContextVar[Tape | None] = ContextVar(
    "jointdst_active_tape", default=None
)


class Tensor:
    """A dense array of real values that may take part in differentiation.

    Parameters
    ----------
    data
        Values of the tensor.  Copied only if it is not already a float
        array.
    requires_grad
        Whether gradients should flow back into this tensor.
    """

    __slots__ = ("data", "requires_grad")

    def __init__(
        self, data: npt.ArrayLike, *, requires_grad: bool = False
    ) -> None:
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data: Array = array
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype[Any]:
        return self.data.dtype

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        if self.data.size != 1:
            raise ShapeError("item", self.shape, (1,))
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"

    def __len__(self) -> int:
        return self.shape[0]


class Parameter(Tensor):
    """A trainable tensor with a stable identifier and a gradient buffer.

    Parameters
    ----------
    name
        Unique identifier, stable across checkpoint save and load.
    data
        Initial values.
    """

    __slots__ = ("grad", "name")

    def __init__(self, name: str, data: npt.ArrayLike) -> None:
        super().__init__(data, requires_grad=True)
        self.name = name
        self.grad: Array = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class ParameterSet:
    """An ordered, name-unique collection of parameters."""

    def __init__(self, parameters: Iterable[Parameter] = ()) -> None:
        self._parameters: dict[str, Parameter] = {}
        for parameter in parameters:
            self.add(parameter)

    def add(self, parameter: Parameter) -> Parameter:
        if parameter.name in self._parameters:
            raise ValueError(f"Duplicate parameter id {parameter.name}")
        self._parameters[parameter.name] = parameter
        return parameter

    def __getitem__(self, name: str) -> Parameter:
        return self._parameters[name]

    def __contains__(self, name: object) -> bool:
        return name in self._parameters

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._parameters.values())

    def __len__(self) -> int:
        return len(self._parameters)

    def names(self) -> list[str]:
        return list(self._parameters)

    def count(self) -> int:
        """Return the total number of scalar weights."""
        return sum(p.size for p in self)

    def zero_grad(self) -> None:
        for parameter in self:
            parameter.zero_grad()

    def gradients(self) -> dict[str, Array]:
        return {p.name: p.grad.copy() for p in self}


@dataclass(slots=True)
class TapeEntry:
    """One executed differentiable operation."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


@dataclass
class Tape:
    """Ordered record of the differentiable operations executed under it.

    Use as a context manager; operations run inside the ``with`` block are
    recorded here.  Tapes are bound per context, so concurrent threads each
    see their own active tape.
    """

    entries: list[TapeEntry] = field(default_factory=list)
    _token: Token[Tape | None] | None = field(default=None, repr=False)

    def __enter__(self) -> Tape:
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.entries)

    def record(
        self,
        op: str,
        inputs: tuple[Tensor, ...],
        output: Tensor,
        backward: BackwardFn,
    ) -> None:
        self.entries.append(TapeEntry(op, inputs, output, backward))

    def backward(
        self, loss: Tensor, parameters: ParameterSet | None = None
    ) -> dict[str, Array]:
        return backward(self, loss, parameters)


def current_tape() -> Tape | None:
    """Return the tape active in this context, if any."""
    return _active_tape.get()


def backward(
    tape: Tape, loss: Tensor, parameters: ParameterSet | None = None
) -> dict[str, Array]:
    """Compute d(loss)/d(parameter) into every parameter's gradient.

    Gradient buffers of ``parameters`` and of every parameter recorded on
    the tape are reset before the replay, so each call starts from zero
    and a parameter the loss does not depend on ends with a zero gradient.
    Entries are replayed once each, newest first.  A parameter used at
    several time steps receives the sum of its contributions.

    Parameters
    ----------
    tape
        Tape the loss was computed on.
    loss
        Single-element tensor.
    parameters
        If given, the gradients of these parameters are returned.

    Returns
    -------
    dict of str to numpy.ndarray
        Copies of the gradient buffers of ``parameters``.

    Raises
    ------
    ShapeError
        If ``loss`` is not a scalar.
    """
    if loss.size != 1:
        raise ShapeError("backward", loss.shape, ())
    if parameters is not None:
        parameters.zero_grad()
    on_tape = {
        id(tensor): tensor
        for entry in tape.entries
        for tensor in entry.inputs
        if isinstance(tensor, Parameter)
    }
    for parameter in on_tape.values():
        parameter.zero_grad()
    grads: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
    for entry in reversed(tape.entries):
        upstream = grads.pop(id(entry.output), None)
        if upstream is None:
            continue
        for tensor, grad in zip(
            entry.inputs, entry.backward(upstream), strict=True
        ):
            if grad is None or not tensor.requires_grad:
                continue
            if isinstance(tensor, Parameter):
                tensor.grad += grad.reshape(tensor.grad.shape)
            elif id(tensor) in grads:
                grads[id(tensor)] = grads[id(tensor)] + grad
            else:
                grads[id(tensor)] = grad
    if parameters is None:
        return {}
    return parameters.gradients()
