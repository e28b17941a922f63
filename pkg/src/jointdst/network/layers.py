"""Parameterized building blocks: dense layers, GRU and LSTM cells."""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from typing import Any

import numpy as np

from ..autodiff import Parameter, ParameterSet, Tensor
from ..autodiff import ops

__all__ = [
    "BiGRU",
    "BiLSTM",
    "Dense",
    "FeedForward",
    "GRUCell",
    "LSTMCell",
    "Module",
]


class Module:
    """Owner of named parameters and of child modules.

    Parameter ids are the dotted path from the root module, for example
    ``utterance.forward.input_weight``.
    """

    def __init__(
        self, name: str, rng: np.random.Generator, dtype: np.dtype[Any]
    ) -> None:
        self.name = name
        self._rng = rng
        self._dtype = np.dtype(dtype)
        self._parameters: list[Parameter] = []
        self._children: list[Module] = []

    def child(self, module: Module) -> Module:
        self._children.append(module)
        return module

    def _qualify(self, name: str) -> str:
        return f"{self.name}.{name}" if self.name else name

    def weight(self, name: str, rows: int, cols: int) -> Parameter:
        """Create a matrix drawn uniformly in ``±sqrt(6/(rows+cols))``."""
        limit = np.sqrt(6.0 / (rows + cols))
        data = self._rng.uniform(-limit, limit, size=(rows, cols))
        return self._add(name, data)

    def zeros(self, name: str, *shape: int) -> Parameter:
        return self._add(name, np.zeros(shape))

    def _add(self, name: str, data: np.ndarray) -> Parameter:
        parameter = Parameter(self._qualify(name), data.astype(self._dtype))
        self._parameters.append(parameter)
        return parameter

    def iter_parameters(self) -> Iterator[Parameter]:
        yield from self._parameters
        for child in self._children:
            yield from child.iter_parameters()

    def parameters(self) -> ParameterSet:
        """Return every parameter of this module and its children once."""
        seen: dict[int, Parameter] = {}
        for parameter in self.iter_parameters():
            seen.setdefault(id(parameter), parameter)
        return ParameterSet(seen.values())


class Dense(Module):
    """Affine layer with an optional ReLU."""

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        in_size: int,
        out_size: int,
        *,
        activation: str | None = None,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.in_size = in_size
        self.out_size = out_size
        self.activation = activation
        self.kernel = self.weight("weight", out_size, in_size)
        self.bias = self.zeros("bias", out_size)

    def __call__(self, x: Tensor) -> Tensor:
        out = ops.linear(x, self.kernel, self.bias)
        if self.activation == "relu":
            return ops.relu(out)
        return out


class FeedForward(Module):
    """One hidden ReLU layer of half the input width, then a scalar output."""

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        in_size: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.hidden_size = max(1, in_size // 2)
        self.hidden = self.child(
            Dense(
                self._qualify("hidden"),
                rng,
                dtype,
                in_size,
                self.hidden_size,
                activation="relu",
            )
        )
        self.output = self.child(
            Dense(self._qualify("output"), rng, dtype, self.hidden_size, 1)
        )

    def __call__(self, x: Tensor) -> Tensor:
        return self.output(self.hidden(x))


class GRUCell(Module):
    """GRU with update and reset gates and a tanh candidate state.

    The reset gate scales the previous state before the recurrent
    projection of the candidate.
    """

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        in_size: int,
        hidden_size: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.in_size = in_size
        self.hidden_size = hidden_size
        self.input_weight = self.weight(
            "input_weight", 3 * hidden_size, in_size
        )
        self.gate_weight = self.weight(
            "gate_weight", 2 * hidden_size, hidden_size
        )
        self.candidate_weight = self.weight(
            "candidate_weight", hidden_size, hidden_size
        )
        self.bias = self.zeros("bias", 3 * hidden_size)

    def initial_state(self) -> Tensor:
        return Tensor(np.zeros(self.hidden_size, dtype=self._dtype))

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        size = self.hidden_size
        projected = ops.linear(x, self.input_weight, self.bias)
        gates = ops.add(
            ops.slice_last(projected, 0, 2 * size),
            ops.linear(h, self.gate_weight),
        )
        update = ops.sigmoid(ops.slice_last(gates, 0, size))
        reset = ops.sigmoid(ops.slice_last(gates, size, 2 * size))
        candidate = ops.tanh(
            ops.add(
                ops.slice_last(projected, 2 * size, 3 * size),
                ops.linear(ops.mul(reset, h), self.candidate_weight),
            )
        )
        return ops.add(
            ops.mul(ops.one_minus(update), h), ops.mul(update, candidate)
        )


class LSTMCell(Module):
    """LSTM without peepholes; gate order input, forget, cell, output."""

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        in_size: int,
        hidden_size: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.in_size = in_size
        self.hidden_size = hidden_size
        self.input_weight = self.weight(
            "input_weight", 4 * hidden_size, in_size
        )
        self.recurrent_weight = self.weight(
            "recurrent_weight", 4 * hidden_size, hidden_size
        )
        self.bias = self.zeros("bias", 4 * hidden_size)

    def __call__(
        self, x: Tensor, state: tuple[Tensor, Tensor]
    ) -> tuple[Tensor, Tensor]:
        h, c = state
        size = self.hidden_size
        z = ops.add(
            ops.linear(x, self.input_weight, self.bias),
            ops.linear(h, self.recurrent_weight),
        )
        input_gate = ops.sigmoid(ops.slice_last(z, 0, size))
        forget_gate = ops.sigmoid(ops.slice_last(z, size, 2 * size))
        cell_input = ops.tanh(ops.slice_last(z, 2 * size, 3 * size))
        output_gate = ops.sigmoid(ops.slice_last(z, 3 * size, 4 * size))
        c_next = ops.add(
            ops.mul(forget_gate, c), ops.mul(input_gate, cell_input)
        )
        h_next = ops.mul(output_gate, ops.tanh(c_next))
        return h_next, c_next


class BiGRU(Module):
    """Single-layer bidirectional GRU over a sequence of vectors."""

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        in_size: int,
        hidden_size: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.hidden_size = hidden_size
        self.forward = self.child(
            GRUCell(self._qualify("forward"), rng, dtype, in_size, hidden_size)
        )
        self.backward = self.child(
            GRUCell(
                self._qualify("backward"), rng, dtype, in_size, hidden_size
            )
        )

    def __call__(
        self, inputs: Sequence[Tensor]
    ) -> tuple[Tensor, list[Tensor]]:
        """Return the concatenated final states and per-step outputs."""
        forward_states = _run_gru(self.forward, inputs)
        backward_states = _run_gru(self.backward, inputs[::-1])[::-1]
        outputs = [
            ops.concat([f, b])
            for f, b in zip(forward_states, backward_states, strict=True)
        ]
        final = ops.concat([forward_states[-1], backward_states[0]])
        return final, outputs


def _run_gru(cell: GRUCell, inputs: Sequence[Tensor]) -> list[Tensor]:
    h = cell.initial_state()
    states = []
    for x in inputs:
        h = cell(x, h)
        states.append(h)
    return states


class BiLSTM(Module):
    """Single-layer bidirectional LSTM with caller-provided initial states.

    Each direction starts from its own hidden state and a zero cell state.
    """

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        in_size: int,
        hidden_size: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.hidden_size = hidden_size
        self.forward = self.child(
            LSTMCell(
                self._qualify("forward"), rng, dtype, in_size, hidden_size
            )
        )
        self.backward = self.child(
            LSTMCell(
                self._qualify("backward"), rng, dtype, in_size, hidden_size
            )
        )

    def __call__(
        self,
        inputs: Sequence[Tensor],
        forward_h0: Tensor,
        backward_h0: Tensor,
    ) -> list[Tensor]:
        """Return ``backward ⊕ forward`` outputs for every step."""
        forward = _run_lstm(self.forward, inputs, forward_h0)
        backward = _run_lstm(self.backward, inputs[::-1], backward_h0)[::-1]
        return [
            ops.concat([b, f]) for f, b in zip(forward, backward, strict=True)
        ]


def _run_lstm(
    cell: LSTMCell, inputs: Sequence[Tensor], h0: Tensor
) -> list[Tensor]:
    zero = np.zeros(cell.hidden_size, dtype=h0.dtype)
    state = (h0, Tensor(zero))
    outputs = []
    for x in inputs:
        state = cell(x, state)
        outputs.append(state[0])
    return outputs
