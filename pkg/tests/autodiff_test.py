"""Tests for the tensor core: operations, backward, ADAM and gradcheck."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from jointdst.autodiff import (
    Adam,
    AdamState,
    Parameter,
    ParameterSet,
    Tape,
    Tensor,
    backward,
    gradient_check,
)
from jointdst.autodiff import ops
from jointdst.exceptions import GradientCheckError, ShapeError


def _parameter(name: str, shape: tuple[int, ...], seed: int) -> Parameter:
    rng = np.random.default_rng(seed)
    return Parameter(name, rng.normal(size=shape))


def test_add_shape_mismatch() -> None:
    with pytest.raises(ShapeError) as excinfo:
        ops.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))
    assert excinfo.value.op == "add"
    assert excinfo.value.shapes == ((3,), (4,))


def test_reshape_size_mismatch() -> None:
    with pytest.raises(ShapeError):
        ops.reshape(Tensor(np.zeros(6)), 4, 2)


def test_no_tape_no_recording() -> None:
    weight = _parameter("w", (2, 3), 0)
    with Tape() as tape:
        ops.linear(Tensor(np.ones(3)), weight)
    assert len(tape) == 1
    ops.linear(Tensor(np.ones(3)), weight)
    assert len(tape) == 1


def test_backward_requires_scalar() -> None:
    weight = _parameter("w", (2, 3), 0)
    with Tape() as tape:
        out = ops.linear(Tensor(np.ones(3)), weight)
    with pytest.raises(ShapeError):
        backward(tape, out)


def test_gradients_accumulate_over_uses() -> None:
    weight = Parameter("w", np.array([2.0]))
    with Tape() as tape:
        loss = ops.total(ops.add(ops.mul(weight, weight), weight))
    grads = backward(tape, loss, ParameterSet([weight]))
    np.testing.assert_allclose(grads["w"], [5.0])


def test_backward_starts_from_zero() -> None:
    first = Parameter("p", np.ones(3))
    second = Parameter("q", np.ones(3))
    parameters = ParameterSet([first, second])
    with Tape() as tape:
        loss = ops.total(second)
    grads = backward(tape, loss, parameters)
    np.testing.assert_array_equal(grads["q"], [1.0, 1.0, 1.0])
    with Tape() as tape:
        loss = ops.total(first)
    grads = backward(tape, loss, parameters)
    np.testing.assert_array_equal(grads["p"], [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(grads["q"], [0.0, 0.0, 0.0])
    np.testing.assert_array_equal(second.grad, [0.0, 0.0, 0.0])

    with Tape() as tape:
        loss = ops.total(first)
    backward(tape, loss)
    backward(tape, loss)
    np.testing.assert_array_equal(first.grad, [1.0, 1.0, 1.0])


def test_cross_entropy_values() -> None:
    logits = Tensor(np.array([0.0, 0.0]))
    assert ops.cross_entropy(logits, 1).item() == pytest.approx(np.log(2))
    rows = Tensor(np.array([[0.0, 0.0], [10.0, -10.0]]))
    weighted = ops.cross_entropy(rows, [0, 1], [1.0, 0.0])
    assert weighted.item() == pytest.approx(np.log(2))


def test_softmax_sums_to_one_and_ignores_shift() -> None:
    rng = np.random.default_rng(0)
    for _ in range(100):
        logits = rng.normal(scale=10.0, size=5)
        probabilities = ops.softmax(Tensor(logits)).data
        assert probabilities.sum() == pytest.approx(1.0)
        shifted = ops.softmax(Tensor(logits + rng.normal(scale=100.0)))
        np.testing.assert_allclose(shifted.data, probabilities, atol=1e-10)


def test_bce_is_stable() -> None:
    logits = Tensor(np.array([1000.0, -1000.0]))
    assert ops.bce_with_logits(logits, [1.0, 0.0]).item() == pytest.approx(
        0.0
    )


@pytest.mark.parametrize(
    "build",
    [
        lambda w, v: ops.total(ops.tanh(ops.linear(v, w))),
        lambda w, v: ops.total(ops.sigmoid(ops.linear(v, w))),
        lambda w, v: ops.cross_entropy(ops.linear(v, w), 1),
        lambda w, v: ops.bce_with_logits(ops.linear(v, w), [1.0, 0.0, 1.0]),
        lambda w, v: ops.total(
            ops.mul(ops.softmax(ops.linear(v, w)), ops.linear(v, w))
        ),
        lambda w, v: ops.total(
            ops.concat(
                [ops.row(w, 0), ops.slice_last(ops.linear(v, w), 0, 2)]
            )
        ),
        lambda w, v: ops.cross_entropy(
            ops.stack([ops.linear(v, w), ops.scale(ops.linear(v, w), 2.0)]),
            [0, 2],
        ),
        lambda w, v: ops.total(
            ops.mean([ops.row(w, 0), ops.one_minus(ops.row(w, 1))])
        ),
        lambda w, v: ops.total(
            ops.log_softmax(ops.reshape(ops.embedding(w, [2, 0]), 8))
        ),
    ],
)
def test_operation_gradients(
    build: Callable[[Parameter, Tensor], Tensor],
) -> None:
    weight = _parameter("w", (3, 4), 1)
    vector = Tensor(np.random.default_rng(2).normal(size=4))
    parameters = ParameterSet([weight])

    def loss() -> Tensor:
        return build(weight, vector)

    assert gradient_check(loss, parameters) < 1e-6


def test_gradient_check_rejects_bad_eps() -> None:
    weight = _parameter("w", (2,), 0)
    with pytest.raises(GradientCheckError):
        gradient_check(lambda: ops.total(weight), ParameterSet([weight]), 0.0)


def test_gradient_check_detects_wrong_gradient() -> None:
    weight = _parameter("w", (3,), 0)

    def wrong() -> Tensor:
        # detach hides the square from the tape but not from the value.
        return ops.total(ops.add(weight, ops.mul(ops.detach(weight), weight)))

    assert gradient_check(wrong, ParameterSet([weight])) > 1e-2


def test_adam_first_step() -> None:
    weight = Parameter("x", np.array([0.0]))
    weight.grad[...] = 1.0
    Adam(ParameterSet([weight]), AdamState(learning_rate=0.1)).step()
    assert weight.data[0] == pytest.approx(-0.1, abs=1e-6)
    assert weight.grad[0] == 0.0


def test_adam_minimizes_quadratic() -> None:
    weight = Parameter("x", np.array([0.0]))
    parameters = ParameterSet([weight])
    optimizer = Adam(parameters, AdamState(learning_rate=0.1))
    target = Tensor(np.array([3.0]))
    for _ in range(200):
        with Tape() as tape:
            diff = ops.sub(weight, target)
            loss = ops.total(ops.mul(diff, diff))
        backward(tape, loss)
        optimizer.step()
    assert abs(weight.data[0] - 3.0) < 0.1
